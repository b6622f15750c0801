use std::path::PathBuf;

use super::{prepare_out, resolve_threads, run_jobs, write_csv, ExperimentConfig};
use crate::error::Result;
use crate::sensing::{empirical_rip_with_mode, RipEstimate};

#[derive(Clone, Debug)]
pub struct RipRow {
    pub seed: u64,
    pub m: usize,
    pub estimate: RipEstimate,
}

/// Empirical T-RIP constants, one ensemble per seed and rank.
pub fn cmd_rip(cfg: &ExperimentConfig) -> Result<(Vec<RipRow>, Vec<PathBuf>)> {
    cfg.validate()?;
    let out = prepare_out(cfg)?;
    let threads = resolve_threads(cfg.threads)?;
    let jobs: Vec<(usize, u64)> = cfg
        .ranks
        .iter()
        .flat_map(|&r| cfg.seeds.iter().map(move |&s| (r, s)))
        .collect();
    let rows = run_jobs(threads, jobs, |(r, seed)| {
        let m = cfg.m.resolve(cfg.n, cfg.n3, r);
        let estimate =
            empirical_rip_with_mode(cfg.n, cfg.n3, r, m, cfg.trials, seed, cfg.measurement)?;
        Ok(RipRow { seed, m, estimate })
    })?;
    let path = out.join("rip.csv");
    write_csv(
        &path,
        &[
            "seed",
            "r",
            "m",
            "trials",
            "delta_hat",
            "min_ratio",
            "max_ratio",
        ],
        rows.iter().map(|row| {
            let e = &row.estimate;
            let lo = e
                .ratio_samples
                .iter()
                .copied()
                .fold(f64::INFINITY, f64::min);
            let hi = e
                .ratio_samples
                .iter()
                .copied()
                .fold(f64::NEG_INFINITY, f64::max);
            vec![
                row.seed.to_string(),
                e.r.to_string(),
                row.m.to_string(),
                e.trials.to_string(),
                e.delta_hat.to_string(),
                lo.to_string(),
                hi.to_string(),
            ]
        }),
    )?;
    Ok((rows, vec![path]))
}
