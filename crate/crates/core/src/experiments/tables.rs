use std::path::PathBuf;
use std::time::Instant;

use super::{
    make_problem, prepare_out, resolve_threads, run_jobs, seed_result, solve_timed, solver_config,
    write_csv, ExperimentConfig, RunRecord,
};
use crate::error::{Error, Result};
use crate::sensing::ProblemParams;

#[derive(Clone, Debug)]
pub struct TableCell {
    pub n: usize,
    pub r_star: usize,
    pub r: usize,
    pub m: usize,
    pub v: f64,
    pub record: RunRecord,
    /// Problem generation time per seed, excluded from `wall_time`.
    pub setup_times: Vec<f64>,
}

/// Mean error and time over the seeds for every `(n, v)` cell, with
/// `r_star = round(rank_frac * n)` and `r = r_star + r_extra`.
pub fn cmd_tables(cfg: &ExperimentConfig) -> Result<(Vec<TableCell>, Vec<PathBuf>)> {
    cfg.validate()?;
    let out = prepare_out(cfg)?;
    let threads = resolve_threads(cfg.threads)?;
    let mut cells = Vec::new();
    for &n in &cfg.ns {
        let r_star = (cfg.rank_frac * n as f64).round() as usize;
        let r = r_star + cfg.r_extra;
        if r_star == 0 || r > n {
            return Err(Error::param(format!(
                "n = {n} gives r_star = {r_star}, r = {r}; need 1 <= r_star and r <= n"
            )));
        }
        let m = cfg.m.resolve(n, cfg.n3, r_star);
        for &v in &cfg.vs {
            cells.push((n, r_star, r, m, v));
        }
    }
    let jobs: Vec<(usize, u64)> = (0..cells.len())
        .flat_map(|c| cfg.seeds.iter().map(move |&s| (c, s)))
        .collect();
    let results = run_jobs(threads, jobs.clone(), |(c, seed)| {
        let (n, r_star, r, m, v) = cells[c];
        let start = Instant::now();
        let p = make_problem(cfg, ProblemParams::new(n, cfg.n3, r_star, m, v, seed))?;
        let setup = start.elapsed().as_secs_f64();
        let (res, wall) = solve_timed(&p, &solver_config(cfg, &p, r))?;
        Ok((seed_result(seed, r, &res, wall), setup))
    })?;

    let runs_path = out.join("table_runs.csv");
    write_csv(
        &runs_path,
        &[
            "n",
            "r_star",
            "m",
            "v",
            "seed",
            "r",
            "rel_error",
            "iterations",
            "wall_time",
            "setup_time",
            "stop_reason",
        ],
        jobs.iter().zip(&results).map(|(&(c, _), (row, setup))| {
            let (n, r_star, _, m, v) = cells[c];
            vec![
                n.to_string(),
                r_star.to_string(),
                m.to_string(),
                v.to_string(),
                row.seed.to_string(),
                row.r.to_string(),
                row.rel_error.to_string(),
                row.iterations.to_string(),
                row.wall_time.to_string(),
                setup.to_string(),
                row.stop_reason.clone(),
            ]
        }),
    )?;

    let per_cell = cfg.seeds.len();
    let summary: Vec<TableCell> = cells
        .iter()
        .enumerate()
        .map(|(c, &(n, r_star, r, m, v))| {
            let chunk = &results[c * per_cell..(c + 1) * per_cell];
            TableCell {
                n,
                r_star,
                r,
                m,
                v,
                record: RunRecord::new(
                    cfg.clone(),
                    chunk.iter().map(|x| x.0.clone()).collect(),
                    Vec::new(),
                ),
                setup_times: chunk.iter().map(|x| x.1).collect(),
            }
        })
        .collect();
    let table_path = out.join("tables.csv");
    write_csv(
        &table_path,
        &[
            "n",
            "r_star",
            "r",
            "m",
            "v",
            "runs",
            "mean_rel_error",
            "std_rel_error",
            "mean_wall_time",
            "std_wall_time",
        ],
        summary.iter().map(|c| {
            let a = c.record.aggregate;
            vec![
                c.n.to_string(),
                c.r_star.to_string(),
                c.r.to_string(),
                c.m.to_string(),
                c.v.to_string(),
                a.count.to_string(),
                a.mean_error.to_string(),
                a.std_error.to_string(),
                a.mean_time.to_string(),
                a.std_time.to_string(),
            ]
        }),
    )?;
    Ok((summary, vec![table_path, runs_path]))
}
