use std::path::PathBuf;

use super::{
    make_problem, prepare_out, resolve_threads, run_jobs, solver_config, write_csv,
    ExperimentConfig,
};
use crate::error::{Error, Result};
use crate::sensing::ProblemParams;
use crate::solver::fgd_solve;

#[derive(Clone, Debug, PartialEq)]
pub struct PhaseCell {
    pub m: usize,
    pub r_star: usize,
    pub successes: usize,
    pub runs: usize,
    pub recovered: bool,
    /// Final relative error per seed; infinite for a diverged run.
    pub errors: Vec<f64>,
}

/// `(m, r_star)` cells: the explicit list when given, else a grid that is
/// log-spaced in `m` and linear in `r_star`.
pub fn phase_cells(cfg: &ExperimentConfig) -> Vec<(usize, usize)> {
    if !cfg.cells.is_empty() {
        return cfg.cells.clone();
    }
    let full = (cfg.n * cfg.n * cfg.n3) as f64;
    let lo = (cfg.m_min_frac * full).ceil().max(1.0);
    let hi = (cfg.m_max_frac * full).ceil().max(lo);
    let spaced = |count: usize, i: usize| {
        if count <= 1 {
            0.0
        } else {
            i as f64 / (count - 1) as f64
        }
    };
    let ms: Vec<usize> = (0..cfg.grid_m)
        .map(|i| (lo * (hi / lo).powf(spaced(cfg.grid_m, i))).round() as usize)
        .collect();
    let rs: Vec<usize> = (0..cfg.grid_r)
        .map(|i| (1.0 + (cfg.n - 1) as f64 * spaced(cfg.grid_r, i)).round() as usize)
        .collect();
    let mut cells = Vec::new();
    for &r in &rs {
        for &m in &ms {
            if !cells.contains(&(m, r)) {
                cells.push((m, r));
            }
        }
    }
    cells
}

/// Recovery success counts over the grid, solving at the true rank.
pub fn cmd_phase(cfg: &ExperimentConfig) -> Result<(Vec<PhaseCell>, Vec<PathBuf>)> {
    cfg.validate()?;
    let out = prepare_out(cfg)?;
    let threads = resolve_threads(cfg.threads)?;
    let cells = phase_cells(cfg);
    if let Some(&(m, r)) = cells.iter().find(|&&(m, r)| m == 0 || r == 0 || r > cfg.n) {
        return Err(Error::param(format!(
            "phase cell (m = {m}, r_star = {r}) is invalid for n = {}",
            cfg.n
        )));
    }
    let jobs: Vec<(usize, usize, u64)> = cells
        .iter()
        .flat_map(|&(m, r)| cfg.seeds.iter().map(move |&s| (m, r, s)))
        .collect();
    let results = run_jobs(threads, jobs.clone(), |(m, r_star, seed)| {
        let params = ProblemParams::new(cfg.n, cfg.n3, r_star, m, cfg.v, seed);
        let p = make_problem(cfg, params)?;
        match fgd_solve(&p, &solver_config(cfg, &p, r_star)) {
            Ok(res) => Ok((
                res.trace.last().map_or(f64::INFINITY, |t| t.rel_error),
                res.iterations,
            )),
            Err(Error::Diverged { iteration, .. }) => Ok((f64::INFINITY, iteration)),
            Err(e) => Err(e),
        }
    })?;

    let runs_path = out.join("phase_runs.csv");
    write_csv(
        &runs_path,
        &["m", "r_star", "seed", "rel_error", "iterations", "success"],
        jobs.iter().zip(&results).map(|(&(m, r, s), &(e, it))| {
            vec![
                m.to_string(),
                r.to_string(),
                s.to_string(),
                e.to_string(),
                it.to_string(),
                (e <= cfg.success_tol).to_string(),
            ]
        }),
    )?;

    let per_cell = cfg.seeds.len();
    let summary: Vec<PhaseCell> = cells
        .iter()
        .enumerate()
        .map(|(c, &(m, r_star))| {
            let errors: Vec<f64> = results[c * per_cell..(c + 1) * per_cell]
                .iter()
                .map(|x| x.0)
                .collect();
            let successes = errors.iter().filter(|&&e| e <= cfg.success_tol).count();
            PhaseCell {
                m,
                r_star,
                successes,
                runs: per_cell,
                recovered: successes >= cfg.success_min,
                errors,
            }
        })
        .collect();
    let grid_path = out.join("phase.csv");
    write_csv(
        &grid_path,
        &["m", "r_star", "successes", "runs", "recovered"],
        summary.iter().map(|c| {
            vec![
                c.m.to_string(),
                c.r_star.to_string(),
                c.successes.to_string(),
                c.runs.to_string(),
                c.recovered.to_string(),
            ]
        }),
    )?;
    Ok((summary, vec![grid_path, runs_path]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::config::Command;

    #[test]
    fn default_grid_spans_the_corners() {
        let cfg = ExperimentConfig::defaults(Command::Phase);
        let cells = phase_cells(&cfg);
        assert_eq!(cells.len(), 100);
        assert!(cells.contains(&(45, 1)));
        assert!(cells.contains(&(4500, 30)));
        assert!(cells
            .iter()
            .all(|&(m, r)| (45..=4500).contains(&m) && (1..=30).contains(&r)));
    }
}
