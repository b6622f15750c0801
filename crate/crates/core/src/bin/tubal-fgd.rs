//! Command-line front end for the experiment drivers.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use tubal_fgd::experiments::{run, Command, ExperimentConfig};

#[derive(Parser)]
#[command(
    name = "tubal-fgd",
    version,
    about = "Low-tubal-rank tensor recovery experiments"
)]
struct Cli {
    /// Flat `key = value` config file.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Base seed; repeated runs use consecutive seeds.
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Worker threads (default: $TUBAL_FGD_THREADS, else all cores).
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,
    #[arg(long, global = true, value_parser = ["gaussian", "symmetrized"])]
    measurement: Option<String>,
    /// Extra `key=value` overrides, applied after the config file.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    /// Error and objective traces of FGD per seed and rank.
    Convergence,
    /// Recovery success over an (m, r_star) grid.
    Phase,
    /// Mean error per (n, noise level) cell.
    Tables,
    /// Error-term dynamics of the population and sample iterations.
    LemmaCheck,
    /// Per-iteration kernel timings and their scaling.
    Bench,
    /// Empirical restricted isometry constants.
    Rip,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::Convergence => Command::Convergence,
            Cmd::Phase => Command::Phase,
            Cmd::Tables => Command::Tables,
            Cmd::LemmaCheck => Command::LemmaCheck,
            Cmd::Bench => Command::Bench,
            Cmd::Rip => Command::Rip,
        }
    }
}

fn overrides(cli: &Cli) -> Result<Vec<(String, String)>, String> {
    let mut pairs = Vec::new();
    for s in &cli.set {
        let (k, v) = s
            .split_once('=')
            .ok_or_else(|| format!("--set expects KEY=VALUE, got `{s}`"))?;
        pairs.push((k.trim().to_string(), v.trim().to_string()));
    }
    if let Some(seed) = cli.seed {
        pairs.push(("seed".into(), seed.to_string()));
    }
    if let Some(out) = &cli.out {
        pairs.push(("out".into(), out.display().to_string()));
    }
    if let Some(t) = cli.threads {
        pairs.push(("threads".into(), t.to_string()));
    }
    if let Some(m) = &cli.measurement {
        pairs.push(("measurement".into(), m.clone()));
    }
    Ok(pairs)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let pairs = match overrides(&cli) {
        Ok(p) => p,
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(2);
        }
    };
    let result = ExperimentConfig::load(cli.command.into(), cli.config.as_deref(), &pairs)
        .and_then(|cfg| run(&cfg));
    match result {
        Ok(outputs) => {
            for f in outputs.files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() {
                2
            } else if e.is_numerical() {
                3
            } else {
                1
            })
        }
    }
}
