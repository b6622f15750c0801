use std::path::PathBuf;

use super::{
    make_problem, opt, prepare_out, resolve_threads, run_jobs, seed_header, seed_result, seed_row,
    solve_timed, solver_config, write_csv, ExperimentConfig, RunRecord,
};
use crate::diagnostics::{rate_fit, RateFit};
use crate::error::Result;
use crate::sensing::ProblemParams;
use crate::solver::{ConvergenceTrace, SolveResult};

#[derive(Clone, Debug)]
pub struct ConvergenceRun {
    pub seed: u64,
    pub r: usize,
    pub result: SolveResult,
    pub wall_time: f64,
    /// `None` when the trace is too short to fit.
    pub rate: Option<RateFit>,
}

#[derive(Clone, Debug)]
pub struct ConvergenceOutput {
    pub runs: Vec<ConvergenceRun>,
    /// One record per estimated rank, in `cfg.ranks` order.
    pub records: Vec<RunRecord>,
    pub files: Vec<PathBuf>,
}

pub(crate) fn trace_rows(
    trace: &ConvergenceTrace,
    with_terms: bool,
) -> (Vec<&'static str>, Vec<Vec<String>>) {
    let mut header = vec!["t", "rel_error", "objective", "rel_change", "wall_time"];
    if with_terms {
        header.extend(["d_ss", "st", "tt", "e_t"]);
    }
    let rows = trace
        .records
        .iter()
        .map(|rec| {
            let mut row = vec![
                rec.t.to_string(),
                rec.rel_error.to_string(),
                rec.objective.to_string(),
                opt(rec.rel_change),
                rec.wall_time.to_string(),
            ];
            if with_terms {
                match &rec.error_terms {
                    Some(e) => row.extend([e.d_ss, e.st, e.tt, e.e_t].map(|v| v.to_string())),
                    None => row.extend(std::iter::repeat_n(String::new(), 4)),
                }
            }
            row
        })
        .collect();
    (header, rows)
}

/// Runs FGD for every seed and estimated rank and writes one trace per run.
pub fn cmd_convergence(cfg: &ExperimentConfig) -> Result<ConvergenceOutput> {
    cfg.validate()?;
    let out = prepare_out(cfg)?;
    let threads = resolve_threads(cfg.threads)?;
    let m = cfg.m.resolve(cfg.n, cfg.n3, cfg.r_star);
    let per_seed = run_jobs(threads, cfg.seeds.clone(), |seed| {
        let params = ProblemParams::new(cfg.n, cfg.n3, cfg.r_star, m, cfg.v, seed);
        let p = make_problem(cfg, params)?;
        let mut runs = Vec::new();
        for &r in &cfg.ranks {
            let fc = solver_config(cfg, &p, r);
            let (result, wall_time) = solve_timed(&p, &fc)?;
            let rate = rate_fit(&result.trace).ok();
            let path = out.join(format!("trace_r{r}_seed{seed}.csv"));
            let (header, rows) = trace_rows(&result.trace, cfg.record_error_terms);
            write_csv(&path, &header, rows)?;
            runs.push((
                ConvergenceRun {
                    seed,
                    r,
                    result,
                    wall_time,
                    rate,
                },
                path,
            ));
        }
        Ok(runs)
    })?;

    let mut runs = Vec::new();
    let mut traces = Vec::new();
    for (run, path) in per_seed.into_iter().flatten() {
        runs.push(run);
        traces.push(path);
    }

    let mut header: Vec<&str> = seed_header().to_vec();
    header.extend(["rate", "rate_r2"]);
    let summary = out.join("summary.csv");
    write_csv(
        &summary,
        &header,
        runs.iter().map(|run| {
            let mut row = seed_row(&seed_result(run.seed, run.r, &run.result, run.wall_time));
            row.push(run.rate.map_or(String::new(), |f| f.label().to_string()));
            row.push(opt(run.rate.map(|f| f.r2())));
            row
        }),
    )?;

    let records: Vec<RunRecord> = cfg
        .ranks
        .iter()
        .map(|&r| {
            let (rows, files) = runs
                .iter()
                .zip(&traces)
                .filter(|(run, _)| run.r == r)
                .map(|(run, path)| {
                    (
                        seed_result(run.seed, r, &run.result, run.wall_time),
                        path.clone(),
                    )
                })
                .unzip();
            RunRecord::new(cfg.clone(), rows, files)
        })
        .collect();
    let aggregate = out.join("aggregate.csv");
    write_csv(
        &aggregate,
        &[
            "r",
            "runs",
            "mean_rel_error",
            "std_rel_error",
            "mean_wall_time",
            "std_wall_time",
        ],
        records.iter().zip(&cfg.ranks).map(|(rec, r)| {
            let a = rec.aggregate;
            vec![
                r.to_string(),
                a.count.to_string(),
                a.mean_error.to_string(),
                a.std_error.to_string(),
                a.mean_time.to_string(),
                a.std_time.to_string(),
            ]
        }),
    )?;

    let mut files = traces;
    files.extend([summary, aggregate]);
    Ok(ConvergenceOutput {
        runs,
        records,
        files,
    })
}
