use std::path::PathBuf;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{prepare_out, write_csv, ExperimentConfig};
use crate::error::{Error, Result};
use crate::t_algebra::{fft3, ifft3, Dims, SpectralTensor, Tensor3};
use faer::linalg::matmul::matmul;
use faer::{Accum, Mat, Par};
use num_complex::Complex64;

/// Scratch space for [`fgd_kernel_with`]: one `n x n` and one `n x r`
/// matrix per frequency slice, reused across iterations.
pub struct KernelWorkspace {
    x: Vec<Mat<Complex64>>,
    y: Vec<Mat<Complex64>>,
}

impl KernelWorkspace {
    pub fn new(n: usize, r: usize, n3: usize) -> Self {
        KernelWorkspace {
            x: (0..n3).map(|_| Mat::zeros(n, n)).collect(),
            y: (0..n3).map(|_| Mat::zeros(n, r)).collect(),
        }
    }
}

/// The per-iteration work of FGD on an `n x r x n3` factor: transform `F`,
/// form `F F^H` and `(F F^H) F` slice by slice, transform back.
pub fn fgd_kernel(f: &Tensor3) -> Result<Tensor3> {
    let Dims { n1, n2, n3 } = f.dims();
    fgd_kernel_with(f, &mut KernelWorkspace::new(n1, n2, n3))
}

pub fn fgd_kernel_with(f: &Tensor3, ws: &mut KernelWorkspace) -> Result<Tensor3> {
    let fs = fft3(f);
    let one = Complex64::new(1.0, 0.0);
    for ((x, y), s) in ws.x.iter_mut().zip(ws.y.iter_mut()).zip(fs.slices()) {
        if x.nrows() != s.nrows() || y.ncols() != s.ncols() {
            return Err(Error::shape(format!(
                "workspace does not fit factor {}",
                f.dims()
            )));
        }
        matmul(
            x.as_mut(),
            Accum::Replace,
            s.as_ref(),
            s.adjoint(),
            one,
            Par::Seq,
        );
        matmul(
            y.as_mut(),
            Accum::Replace,
            x.as_ref(),
            s.as_ref(),
            one,
            Par::Seq,
        );
    }
    ifft3(&SpectralTensor::from_slices(ws.y.clone())?)
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchRow {
    pub n: usize,
    pub r: usize,
    pub n3: usize,
    pub reps: usize,
    pub median_ns: f64,
    pub min_ns: f64,
}

/// Time ratio between two shapes that differ by one parameter.
#[derive(Clone, Debug, PartialEq)]
pub struct Scaling {
    /// `n` or `r`.
    pub axis: &'static str,
    pub from: usize,
    pub to: usize,
    pub ratio: f64,
    /// `log(ratio) / log(to / from)`.
    pub exponent: f64,
}

#[derive(Clone, Debug)]
pub struct BenchSummary {
    pub rows: Vec<BenchRow>,
    pub scaling: Vec<Scaling>,
    pub files: Vec<PathBuf>,
}

impl BenchSummary {
    /// Ratio for an exact doubling along `axis`, if measured.
    pub fn doubling(&self, axis: &str) -> Option<f64> {
        self.scaling
            .iter()
            .find(|s| s.axis == axis && s.to == 2 * s.from)
            .map(|s| s.ratio)
    }
}

fn time_shape(n: usize, r: usize, n3: usize, reps: usize, seed: u64) -> Result<BenchRow> {
    let f = Tensor3::random_normal((n, r, n3), 1.0, &mut ChaCha8Rng::seed_from_u64(seed));
    let mut ws = KernelWorkspace::new(n, r, n3);
    for _ in 0..3 {
        std::hint::black_box(fgd_kernel_with(&f, &mut ws)?);
    }
    let mut times = Vec::with_capacity(reps);
    for _ in 0..reps {
        let start = Instant::now();
        std::hint::black_box(fgd_kernel_with(std::hint::black_box(&f), &mut ws)?);
        times.push(start.elapsed().as_nanos() as f64);
    }
    times.sort_by(f64::total_cmp);
    let median = match reps {
        0 => f64::NAN,
        _ if reps % 2 == 1 => times[reps / 2],
        _ => 0.5 * (times[reps / 2 - 1] + times[reps / 2]),
    };
    Ok(BenchRow {
        n,
        r,
        n3,
        reps,
        median_ns: median,
        min_ns: times.first().copied().unwrap_or(f64::NAN),
    })
}

fn scaling(rows: &[BenchRow]) -> Vec<Scaling> {
    let mut out = Vec::new();
    for a in rows {
        for b in rows {
            let pair = if a.r == b.r && a.n3 == b.n3 && b.n > a.n {
                Some(("n", a.n, b.n))
            } else if a.n == b.n && a.n3 == b.n3 && b.r > a.r {
                Some(("r", a.r, b.r))
            } else {
                None
            };
            if let Some((axis, from, to)) = pair {
                let ratio = b.median_ns / a.median_ns;
                out.push(Scaling {
                    axis,
                    from,
                    to,
                    ratio,
                    exponent: ratio.ln() / (to as f64 / from as f64).ln(),
                });
            }
        }
    }
    out
}

/// Median wall time of [`fgd_kernel`] per shape, run sequentially.
pub fn cmd_bench(cfg: &ExperimentConfig) -> Result<BenchSummary> {
    cfg.validate()?;
    let out = prepare_out(cfg)?;
    let seed = cfg.seeds.first().copied().unwrap_or(0);
    let rows = cfg
        .shapes
        .iter()
        .map(|&(n, r, n3)| time_shape(n, r, n3, cfg.reps, seed))
        .collect::<Result<Vec<_>>>()?;
    let scaling = scaling(&rows);
    let bench = out.join("bench.csv");
    write_csv(
        &bench,
        &["n", "r", "n3", "reps", "median_ns", "min_ns"],
        rows.iter().map(|b| {
            vec![
                b.n.to_string(),
                b.r.to_string(),
                b.n3.to_string(),
                b.reps.to_string(),
                b.median_ns.to_string(),
                b.min_ns.to_string(),
            ]
        }),
    )?;
    let scaling_path = out.join("scaling.csv");
    write_csv(
        &scaling_path,
        &["axis", "from", "to", "ratio", "exponent"],
        scaling.iter().map(|s| {
            vec![
                s.axis.to_string(),
                s.from.to_string(),
                s.to.to_string(),
                s.ratio.to_string(),
                s.exponent.to_string(),
            ]
        }),
    )?;
    Ok(BenchSummary {
        rows,
        scaling,
        files: vec![bench, scaling_path],
    })
}
