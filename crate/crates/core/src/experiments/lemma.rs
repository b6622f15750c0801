use std::path::{Path, PathBuf};

use super::{
    make_problem, opt, prepare_out, resolve_threads, run_jobs, solver_config, write_csv,
    ExperimentConfig,
};
use crate::diagnostics::{
    error_terms, rate_fit_series, subspace_basis, subspace_split, tilde_update, ErrorTerms, RateFit,
};
use crate::error::Result;
use crate::sensing::ProblemParams;
use crate::solver::{fgd_solve, spectral_init, StopRule};
use crate::t_algebra::t_product;

pub const CURVES: [&str; 4] = ["d_ss", "st", "tt", "delta"];

#[derive(Clone, Debug, PartialEq)]
pub struct CurveFit {
    /// `population` or `sample`.
    pub dynamics: &'static str,
    pub r: usize,
    pub seed: u64,
    pub curve: &'static str,
    pub fit: Option<RateFit>,
}

#[derive(Clone, Debug)]
pub struct LemmaOutput {
    pub fits: Vec<CurveFit>,
    /// Iterates on which the sandwich bound was checked (and held).
    pub sandwich_checks: usize,
    pub files: Vec<PathBuf>,
}

impl LemmaOutput {
    pub fn fit(&self, dynamics: &str, r: usize, curve: &str) -> Option<&CurveFit> {
        self.fits
            .iter()
            .find(|f| f.dynamics == dynamics && f.r == r && f.curve == curve)
    }
}

fn curve_value(e: &ErrorTerms, curve: &str) -> f64 {
    match curve {
        "d_ss" => e.d_ss,
        "st" => e.st,
        "tt" => e.tt,
        _ => e.delta_norm,
    }
}

fn fits_for(
    dynamics: &'static str,
    r: usize,
    seed: u64,
    terms: &[(usize, ErrorTerms)],
) -> Vec<CurveFit> {
    let ts: Vec<f64> = terms.iter().map(|(t, _)| *t as f64).collect();
    CURVES
        .iter()
        .map(|&curve| {
            let es: Vec<f64> = terms.iter().map(|(_, e)| curve_value(e, curve)).collect();
            CurveFit {
                dynamics,
                r,
                seed,
                curve,
                fit: rate_fit_series(&ts, &es).ok(),
            }
        })
        .collect()
}

fn write_terms(path: &Path, terms: &[(usize, ErrorTerms)]) -> Result<()> {
    write_csv(
        path,
        &["t", "d_ss", "st", "tt", "e_t", "delta"],
        terms.iter().map(|(t, e)| {
            vec![t.to_string()]
                .into_iter()
                .chain([e.d_ss, e.st, e.tt, e.e_t, e.delta_norm].map(|v| v.to_string()))
                .collect::<Vec<_>>()
        }),
    )
}

/// Population dynamics in split coordinates and sample FGD, both from the
/// spectral initialization, with the error triple tracked every iteration.
pub fn cmd_lemma_check(cfg: &ExperimentConfig) -> Result<LemmaOutput> {
    cfg.validate()?;
    let out = prepare_out(cfg)?;
    let threads = resolve_threads(cfg.threads)?;
    let m = cfg.m.resolve(cfg.n, cfg.n3, cfg.r_star);
    let per_seed = run_jobs(threads, cfg.seeds.clone(), |seed| {
        let p = make_problem(
            cfg,
            ProblemParams::new(cfg.n, cfg.n3, cfg.r_star, m, cfg.v, seed),
        )?;
        let basis = subspace_basis(&p.x_star, cfg.r_star)?;
        let mut fits = Vec::new();
        let mut files = Vec::new();
        let mut checks = 0;
        for &r in &cfg.ranks {
            let f0 = spectral_init(&p, r)?;

            let (mut s, mut t) = subspace_split(&f0, &basis)?;
            let mut population = Vec::with_capacity(cfg.max_iters + 1);
            for it in 0..=cfg.max_iters {
                if it % cfg.trace_every == 0 || it == cfg.max_iters {
                    let f = t_product(&basis.u, &s)?.add(&t_product(&basis.v, &t)?)?;
                    population.push((it, error_terms(&f, &basis, &p.x_star)?));
                }
                if it < cfg.max_iters {
                    (s, t) = tilde_update(&s, &t, &basis, cfg.eta)?;
                }
            }

            let mut fc = solver_config(cfg, &p, r);
            fc.stop = StopRule::ItersOnly;
            fc.record_error_terms = true;
            let res = fgd_solve(&p, &fc)?;
            let sample: Vec<(usize, ErrorTerms)> = res
                .trace
                .records
                .iter()
                .filter_map(|rec| rec.error_terms.map(|e| (rec.t, e)))
                .collect();

            checks += population.len() + sample.len();
            fits.extend(fits_for("population", r, seed, &population));
            fits.extend(fits_for("sample", r, seed, &sample));
            for (name, terms) in [("population", &population), ("sample", &sample)] {
                let path = out.join(format!("lemma_{name}_r{r}_seed{seed}.csv"));
                write_terms(&path, terms)?;
                files.push(path);
            }
        }
        Ok((fits, files, checks))
    })?;

    let mut fits = Vec::new();
    let mut files = Vec::new();
    let mut sandwich_checks = 0;
    for (f, p, c) in per_seed {
        fits.extend(f);
        files.extend(p);
        sandwich_checks += c;
    }
    let rates = out.join("rates.csv");
    write_csv(
        &rates,
        &[
            "dynamics", "r", "seed", "curve", "rate", "r2", "slope", "c", "t0",
        ],
        fits.iter().map(|f| {
            let (slope, c, t0) = match f.fit {
                Some(RateFit::Linear { slope, .. }) => (Some(slope), None, None),
                Some(RateFit::Sublinear { c, t0, .. }) => (None, Some(c), Some(t0)),
                None => (None, None, None),
            };
            vec![
                f.dynamics.to_string(),
                f.r.to_string(),
                f.seed.to_string(),
                f.curve.to_string(),
                f.fit
                    .map_or("insufficient".to_string(), |x| x.label().to_string()),
                opt(f.fit.map(|x| x.r2())),
                opt(slope),
                opt(c),
                opt(t0),
            ]
        }),
    )?;
    files.push(rates);
    Ok(LemmaOutput {
        fits,
        sandwich_checks,
        files,
    })
}
