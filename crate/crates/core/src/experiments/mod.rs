//! Experiment drivers behind the `tubal-fgd` CLI.
//!
//! Every command takes a resolved [`ExperimentConfig`], runs its independent
//! jobs (seeds, grid cells, table cells) on a bounded worker pool, merges the
//! results in job order and writes CSV files plus `config.txt` and
//! `seeds.csv` into the output directory.

mod bench;
pub mod config;
mod convergence;
pub mod io;
mod lemma;
mod phase;
mod rip;
mod tables;

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::error::{Error, Result};
use crate::sensing::{gram_bytes, Materialization, ProblemInstance, ProblemParams, SymCoords};
use crate::solver::{fgd_solve, Backend, FgdConfig, SolveResult, DEFAULT_GRAM_BUDGET};
use crate::Dims;

pub use bench::{
    cmd_bench, fgd_kernel, fgd_kernel_with, BenchRow, BenchSummary, KernelWorkspace, Scaling,
};
pub use config::{parse_pairs, Command, ExperimentConfig, MSpec, StopSpec};
pub use convergence::{cmd_convergence, ConvergenceOutput, ConvergenceRun};
pub use io::{decode_tensor, encode_tensor, read_tensor, write_tensor};
pub use lemma::{cmd_lemma_check, CurveFit, LemmaOutput};
pub use phase::{cmd_phase, phase_cells, PhaseCell};
pub use rip::{cmd_rip, RipRow};
pub use tables::{cmd_tables, TableCell};

pub const THREADS_ENV: &str = "TUBAL_FGD_THREADS";

/// Dense ensembles up to this size are kept in memory for the direct backend.
const DENSE_DIRECT_BUDGET: usize = 256 << 20;

/// Worker count: explicit value, else `TUBAL_FGD_THREADS`, else the number
/// of available cores.
pub fn resolve_threads(explicit: Option<usize>) -> Result<usize> {
    let n = match explicit {
        Some(n) => n,
        None => match std::env::var(THREADS_ENV) {
            Ok(v) => v.trim().parse().map_err(|_| {
                Error::param(format!(
                    "{THREADS_ENV} must be a positive integer, got `{v}`"
                ))
            })?,
            Err(_) => std::thread::available_parallelism().map_or(1, |n| n.get()),
        },
    };
    if n == 0 {
        return Err(Error::param("thread count must be at least 1"));
    }
    Ok(n)
}

/// Runs `jobs` on a pool of `threads` workers; results come back in job order.
pub fn run_jobs<J, T, F>(threads: usize, jobs: Vec<J>, f: F) -> Result<Vec<T>>
where
    J: Send,
    T: Send,
    F: Fn(J) -> Result<T> + Sync,
{
    use rayon::prelude::*;
    if threads <= 1 {
        return jobs.into_iter().map(f).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::param(format!("cannot start worker pool: {e}")))?;
    pool.install(|| jobs.into_par_iter().map(&f).collect())
}

/// Creates the output directory and writes the provenance files.
pub fn prepare_out(cfg: &ExperimentConfig) -> Result<PathBuf> {
    fs::create_dir_all(&cfg.out)?;
    fs::write(cfg.out.join("config.txt"), cfg.serialize())?;
    let mut w = csv::Writer::from_path(cfg.out.join("seeds.csv"))?;
    w.write_record(["seed"])?;
    for s in &cfg.seeds {
        w.write_record([s.to_string()])?;
    }
    w.flush()?;
    Ok(cfg.out.clone())
}

pub(crate) fn write_csv<I, R>(path: &Path, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}

pub(crate) fn opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

/// One solver run of an experiment.
#[derive(Clone, Debug, PartialEq)]
pub struct SeedResult {
    pub seed: u64,
    pub r: usize,
    pub rel_error: f64,
    pub iterations: usize,
    pub wall_time: f64,
    pub stop_reason: String,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Aggregate {
    pub count: usize,
    pub mean_error: f64,
    pub std_error: f64,
    pub mean_time: f64,
    pub std_time: f64,
}

impl Aggregate {
    /// Sample statistics; the standard deviation is zero for a single row.
    pub fn of(rows: &[SeedResult]) -> Self {
        let (me, se) = mean_std(rows.iter().map(|r| r.rel_error));
        let (mt, st) = mean_std(rows.iter().map(|r| r.wall_time));
        Aggregate {
            count: rows.len(),
            mean_error: me,
            std_error: se,
            mean_time: mt,
            std_time: st,
        }
    }
}

fn mean_std(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.clone().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

/// Per-seed results of a batch of runs with their aggregate.
#[derive(Clone, Debug)]
pub struct RunRecord {
    pub config: ExperimentConfig,
    pub rows: Vec<SeedResult>,
    pub aggregate: Aggregate,
    pub trace_files: Vec<PathBuf>,
}

impl RunRecord {
    pub fn new(config: ExperimentConfig, rows: Vec<SeedResult>, trace_files: Vec<PathBuf>) -> Self {
        let aggregate = Aggregate::of(&rows);
        RunRecord {
            config,
            rows,
            aggregate,
            trace_files,
        }
    }
}

pub(crate) fn seed_header() -> [&'static str; 6] {
    [
        "seed",
        "r",
        "rel_error",
        "iterations",
        "wall_time",
        "stop_reason",
    ]
}

pub(crate) fn seed_row(r: &SeedResult) -> Vec<String> {
    vec![
        r.seed.to_string(),
        r.r.to_string(),
        r.rel_error.to_string(),
        r.iterations.to_string(),
        r.wall_time.to_string(),
        r.stop_reason.clone(),
    ]
}

/// Generates an instance and picks how gradients are evaluated.
///
/// Small ensembles are held densely for the direct backend; larger ones
/// get the normal-equation operator, built in the same pass as `y`.
pub(crate) fn make_problem(
    cfg: &ExperimentConfig,
    params: ProblemParams,
) -> Result<ProblemInstance> {
    let ProblemParams { n, n3, m, .. } = params;
    let d = n * n * n3;
    let ds = SymCoords::new(Dims::new(n, n, n3)).len();
    let dense_bytes = m.saturating_mul(d).saturating_mul(8);
    let gram_fits = gram_bytes(n, n3) <= DEFAULT_GRAM_BUDGET;
    let params = params.with_mode(cfg.measurement);
    let use_gram = match cfg.backend {
        Backend::Gram => true,
        Backend::Direct => false,
        Backend::Auto => gram_fits && !(m < ds && dense_bytes <= DENSE_DIRECT_BUDGET),
    };
    if use_gram {
        params.generate_with_gram(DEFAULT_GRAM_BUDGET)
    } else if dense_bytes <= DENSE_DIRECT_BUDGET {
        params
            .with_materialization(Materialization::Dense)
            .generate()
    } else {
        params.generate()
    }
}

/// Solver settings for rank `r` on `p`, keeping the backend chosen by
/// [`make_problem`].
pub(crate) fn solver_config(cfg: &ExperimentConfig, p: &ProblemInstance, r: usize) -> FgdConfig {
    let backend = match (cfg.backend, &p.gram) {
        (_, Some(_)) => Backend::Gram,
        (Backend::Auto, None) => Backend::Direct,
        (b, None) => b,
    };
    FgdConfig {
        eta: cfg.eta,
        max_iters: cfg.max_iters,
        stop: cfg.stop.resolve(r, p.r_star()),
        eta_mode: cfg.eta_mode,
        trace_every: cfg.trace_every,
        record_error_terms: cfg.record_error_terms,
        backend,
        ..FgdConfig::new(r)
    }
}

pub(crate) fn solve_timed(p: &ProblemInstance, fc: &FgdConfig) -> Result<(SolveResult, f64)> {
    let start = Instant::now();
    let res = fgd_solve(p, fc)?;
    Ok((res, start.elapsed().as_secs_f64()))
}

pub(crate) fn seed_result(seed: u64, r: usize, res: &SolveResult, wall_time: f64) -> SeedResult {
    SeedResult {
        seed,
        r,
        rel_error: res.trace.last().map_or(f64::NAN, |t| t.rel_error),
        iterations: res.iterations,
        wall_time,
        stop_reason: res.stop_reason.to_string(),
    }
}

/// Output files written by a command.
#[derive(Clone, Debug, Default)]
pub struct Outputs {
    pub files: Vec<PathBuf>,
}

/// Runs the configured command, returning the files it wrote.
pub fn run(cfg: &ExperimentConfig) -> Result<Outputs> {
    cfg.validate()?;
    let files = match cfg.command {
        Command::Convergence => cmd_convergence(cfg)?.files,
        Command::Phase => cmd_phase(cfg)?.1,
        Command::Tables => cmd_tables(cfg)?.1,
        Command::LemmaCheck => cmd_lemma_check(cfg)?.files,
        Command::Bench => cmd_bench(cfg)?.files,
        Command::Rip => cmd_rip(cfg)?.1,
    };
    Ok(Outputs { files })
}
