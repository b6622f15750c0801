use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::seeds::stream_rng;
use crate::error::{Error, Result};
use crate::t_algebra::{dot, Dims, Tensor3};

pub const DEFAULT_CHUNK: usize = 256;
pub const DEFAULT_DENSE_BUDGET: usize = 2 << 30;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum MeasurementMode {
    /// i.i.d. Gaussian entries.
    #[default]
    PlainGaussian,
    /// Gaussian entries symmetrized so that `A_i = A_i^*`, entry variance unchanged.
    Symmetrized,
}

impl fmt::Display for MeasurementMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MeasurementMode::PlainGaussian => "gaussian",
            MeasurementMode::Symmetrized => "symmetrized",
        })
    }
}

impl FromStr for MeasurementMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" | "plain_gaussian" | "plain" => Ok(MeasurementMode::PlainGaussian),
            "symmetrized" | "symmetric" => Ok(MeasurementMode::Symmetrized),
            other => Err(Error::param(format!("unknown measurement mode `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Materialization {
    /// Regenerate `A_i` on every use, `chunk_size` measurements at a time.
    Streamed { chunk_size: usize },
    /// Keep all `A_i` in memory.
    Dense,
}

impl Default for Materialization {
    fn default() -> Self {
        Materialization::Streamed {
            chunk_size: DEFAULT_CHUNK,
        }
    }
}

/// Index of the entry that `(i, j, k)` maps to under the conjugate transpose.
#[inline]
pub(crate) fn transpose_partner(dims: Dims, p: usize) -> usize {
    let slice = dims.slice_len();
    let (k, rem) = (p / slice, p % slice);
    let (i, j) = (rem / dims.n2, rem % dims.n2);
    dims.offset(j, i, (dims.n3 - k) % dims.n3)
}

/// Seeded Gaussian measurement tensors `A_1..A_m` of shape `n x n x n3`.
///
/// `A_i` depends only on `(seed, i)`: it is drawn from its own ChaCha stream,
/// so chunking, materialization and thread count never change its value.
#[derive(Clone)]
pub struct MeasurementEnsemble {
    dims: Dims,
    m: usize,
    seed: u64,
    mode: MeasurementMode,
    entry_std: f64,
    chunk_size: usize,
    dense: Option<Arc<Vec<f64>>>,
}

impl fmt::Debug for MeasurementEnsemble {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MeasurementEnsemble")
            .field("dims", &self.dims)
            .field("m", &self.m)
            .field("seed", &self.seed)
            .field("mode", &self.mode)
            .field("entry_std", &self.entry_std)
            .field("chunk_size", &self.chunk_size)
            .field("dense", &self.dense.is_some())
            .finish()
    }
}

/// Builds an ensemble with entry standard deviation `1/sqrt(m)` and the
/// default dense-memory budget.
pub fn make_ensemble(
    n: usize,
    n3: usize,
    m: usize,
    seed: u64,
    mode: MeasurementMode,
    materialization: Materialization,
) -> Result<MeasurementEnsemble> {
    MeasurementEnsemble::new(n, n3, m, seed, mode, materialization, DEFAULT_DENSE_BUDGET)
}

impl MeasurementEnsemble {
    pub fn new(
        n: usize,
        n3: usize,
        m: usize,
        seed: u64,
        mode: MeasurementMode,
        materialization: Materialization,
        dense_budget: usize,
    ) -> Result<Self> {
        if n == 0 || n3 == 0 || m == 0 {
            return Err(Error::param(format!(
                "ensemble needs n, n3, m >= 1 (got {n}, {n3}, {m})"
            )));
        }
        let dims = Dims::new(n, n, n3);
        dims.validate()?;
        let chunk_size = match materialization {
            Materialization::Streamed { chunk_size: 0 } => {
                return Err(Error::param("chunk size must be positive"));
            }
            Materialization::Streamed { chunk_size } => chunk_size,
            Materialization::Dense => DEFAULT_CHUNK,
        };
        let mut ens = MeasurementEnsemble {
            dims,
            m,
            seed,
            mode,
            entry_std: 1.0 / (m as f64).sqrt(),
            chunk_size,
            dense: None,
        };
        if materialization == Materialization::Dense {
            let needed = m
                .checked_mul(dims.len())
                .and_then(|x| x.checked_mul(std::mem::size_of::<f64>()))
                .unwrap_or(usize::MAX);
            if needed > dense_budget {
                return Err(Error::OutOfBudget {
                    needed,
                    budget: dense_budget,
                });
            }
            let d = dims.len();
            let mut data = vec![0.0; m * d];
            data.par_chunks_mut(d)
                .enumerate()
                .for_each(|(i, row)| ens.fill(i, row));
            ens.dense = Some(Arc::new(data));
        }
        Ok(ens)
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn mode(&self) -> MeasurementMode {
        self.mode
    }

    pub fn entry_std(&self) -> f64 {
        self.entry_std
    }

    pub fn chunk_size(&self) -> usize {
        self.chunk_size
    }

    pub fn materialization(&self) -> Materialization {
        if self.dense.is_some() {
            Materialization::Dense
        } else {
            Materialization::Streamed {
                chunk_size: self.chunk_size,
            }
        }
    }

    /// Writes `A_i` into `out` (length `n*n*n3`) from its generator.
    pub(crate) fn fill(&self, i: usize, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.dims.len());
        let mut rng = stream_rng(self.seed, i as u64);
        for x in out.iter_mut() {
            *x = rng.sample(StandardNormal);
        }
        match self.mode {
            MeasurementMode::PlainGaussian => out.iter_mut().for_each(|x| *x *= self.entry_std),
            MeasurementMode::Symmetrized => {
                let scale = self.entry_std * std::f64::consts::FRAC_1_SQRT_2;
                for p in 0..out.len() {
                    let q = transpose_partner(self.dims, p);
                    if q == p {
                        out[p] *= self.entry_std;
                    } else if p < q {
                        let v = (out[p] + out[q]) * scale;
                        out[p] = v;
                        out[q] = v;
                    }
                }
            }
        }
    }

    /// The measurement tensor `A_i`.
    pub fn tensor(&self, i: usize) -> Result<Tensor3> {
        if i >= self.m {
            return Err(Error::param(format!(
                "measurement index {i} out of 0..{}",
                self.m
            )));
        }
        let mut data = vec![0.0; self.dims.len()];
        match &self.dense {
            Some(all) => data.copy_from_slice(&all[i * self.dims.len()..(i + 1) * self.dims.len()]),
            None => self.fill(i, &mut data),
        }
        Ok(Tensor3::from_raw(self.dims, data))
    }

    /// Calls `f(first_index, rows)` for consecutive blocks of measurements,
    /// where `rows` holds `A_first, A_first+1, ...` back to back.
    pub(crate) fn for_each_chunk(&self, chunk: usize, mut f: impl FnMut(usize, &[f64])) {
        let d = self.dims.len();
        let mut buf = Vec::new();
        let mut start = 0;
        while start < self.m {
            let end = (start + chunk).min(self.m);
            match &self.dense {
                Some(all) => f(start, &all[start * d..end * d]),
                None => {
                    buf.resize((end - start) * d, 0.0);
                    buf.par_chunks_mut(d)
                        .enumerate()
                        .for_each(|(o, row)| self.fill(start + o, row));
                    f(start, &buf);
                }
            }
            start = end;
        }
    }

    fn with_chunk<T>(&self, c: usize, f: impl FnOnce(&[f64]) -> T) -> T {
        let d = self.dims.len();
        let (start, end) = (c * self.chunk_size, ((c + 1) * self.chunk_size).min(self.m));
        match &self.dense {
            Some(all) => f(&all[start * d..end * d]),
            None => {
                let mut buf = vec![0.0; (end - start) * d];
                for (o, row) in buf.chunks_mut(d).enumerate() {
                    self.fill(start + o, row);
                }
                f(&buf)
            }
        }
    }

    fn num_chunks(&self) -> usize {
        self.m.div_ceil(self.chunk_size)
    }

    /// `y_i = <A_i, X>`.
    pub fn measure(&self, x: &Tensor3) -> Result<Vec<f64>> {
        if x.dims() != self.dims {
            return Err(Error::shape(format!(
                "measure: tensor {} vs ensemble {}",
                x.dims(),
                self.dims
            )));
        }
        let d = self.dims.len();
        let parts: Vec<Vec<f64>> = (0..self.num_chunks())
            .into_par_iter()
            .map(|c| self.with_chunk(c, |rows| rows.chunks(d).map(|a| dot(a, x.data())).collect()))
            .collect();
        Ok(parts.concat())
    }

    /// `sum_i y_i A_i`. Per-chunk partial sums are combined in chunk order, so
    /// the result does not depend on materialization or thread count.
    pub fn adjoint(&self, y: &[f64]) -> Result<Tensor3> {
        if y.len() != self.m {
            return Err(Error::shape(format!(
                "adjoint: {} weights for {} measurements",
                y.len(),
                self.m
            )));
        }
        let d = self.dims.len();
        let mut total = vec![0.0; d];
        let group = rayon::current_num_threads().max(1) * 2;
        let chunks = self.num_chunks();
        let mut c0 = 0;
        while c0 < chunks {
            let c1 = (c0 + group).min(chunks);
            let partials: Vec<Vec<f64>> = (c0..c1)
                .into_par_iter()
                .map(|c| {
                    self.with_chunk(c, |rows| {
                        let mut acc = vec![0.0; d];
                        for (o, a) in rows.chunks(d).enumerate() {
                            let w = y[c * self.chunk_size + o];
                            acc.iter_mut().zip(a).for_each(|(s, v)| *s += w * v);
                        }
                        acc
                    })
                })
                .collect();
            for p in partials {
                total.iter_mut().zip(&p).for_each(|(s, v)| *s += v);
            }
            c0 = c1;
        }
        Tensor3::new(self.dims, total)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partner_is_an_involution() {
        let dims = Dims::new(3, 3, 4);
        for p in 0..dims.len() {
            assert_eq!(transpose_partner(dims, transpose_partner(dims, p)), p);
        }
        assert_eq!(
            transpose_partner(dims, dims.offset(0, 1, 1)),
            dims.offset(1, 0, 3)
        );
    }

    #[test]
    fn dense_budget_is_enforced() {
        let r = MeasurementEnsemble::new(
            4,
            2,
            100,
            1,
            MeasurementMode::PlainGaussian,
            Materialization::Dense,
            1000,
        );
        assert!(matches!(r, Err(Error::OutOfBudget { .. })));
    }

    #[test]
    fn rejects_bad_arguments() {
        let ens = make_ensemble(
            3,
            2,
            5,
            1,
            MeasurementMode::PlainGaussian,
            Materialization::default(),
        )
        .unwrap();
        assert!(matches!(
            ens.measure(&Tensor3::zeros(3, 3, 3)),
            Err(Error::ShapeMismatch(_))
        ));
        assert!(matches!(
            ens.adjoint(&[0.0; 4]),
            Err(Error::ShapeMismatch(_))
        ));
        assert!(make_ensemble(
            0,
            2,
            5,
            1,
            MeasurementMode::PlainGaussian,
            Materialization::default()
        )
        .is_err());
    }

    #[test]
    fn chunk_iteration_matches_tensor() {
        let ens = make_ensemble(
            3,
            2,
            7,
            9,
            MeasurementMode::Symmetrized,
            Materialization::default(),
        )
        .unwrap();
        let d = ens.dims().len();
        ens.for_each_chunk(3, |start, rows| {
            for (o, row) in rows.chunks(d).enumerate() {
                assert_eq!(row, ens.tensor(start + o).unwrap().data());
            }
        });
    }
}
