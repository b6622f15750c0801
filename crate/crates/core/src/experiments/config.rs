//! Flat `key = value` experiment configuration.
//!
//! Values are resolved in three layers: per-command defaults, then the
//! config file, then command-line overrides. The resolved configuration is
//! written next to every result set.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::sensing::MeasurementMode;
use crate::solver::{Backend, EtaMode, StopRule};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Convergence,
    Phase,
    Tables,
    LemmaCheck,
    Bench,
    Rip,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Convergence => "convergence",
            Command::Phase => "phase",
            Command::Tables => "tables",
            Command::LemmaCheck => "lemma-check",
            Command::Bench => "bench",
            Command::Rip => "rip",
        }
    }
}

impl FromStr for Command {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "convergence" => Command::Convergence,
            "phase" => Command::Phase,
            "tables" => Command::Tables,
            "lemma-check" | "lemma_check" => Command::LemmaCheck,
            "bench" => Command::Bench,
            "rip" => Command::Rip,
            other => return Err(Error::param(format!("unknown command `{other}`"))),
        })
    }
}

/// Number of measurements, either explicit or by formula.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum MSpec {
    Fixed(usize),
    /// `10 (2n - r_star) n3`
    Convergence,
    /// `10 r_star n3 (2n - r_star)`
    Table,
    /// `20 (2n - r) n3 r`
    Rip,
}

impl MSpec {
    pub fn resolve(self, n: usize, n3: usize, rank: usize) -> usize {
        let span = (2 * n).saturating_sub(rank);
        match self {
            MSpec::Fixed(m) => m,
            MSpec::Convergence => 10 * span * n3,
            MSpec::Table => 10 * rank * n3 * span,
            MSpec::Rip => 20 * span * n3 * rank,
        }
    }
}

impl fmt::Display for MSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MSpec::Fixed(m) => write!(f, "{m}"),
            MSpec::Convergence => f.write_str("convergence"),
            MSpec::Table => f.write_str("table"),
            MSpec::Rip => f.write_str("rip"),
        }
    }
}

impl FromStr for MSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "convergence" => Ok(MSpec::Convergence),
            "table" => Ok(MSpec::Table),
            "rip" => Ok(MSpec::Rip),
            other => other.parse().map(MSpec::Fixed).map_err(|_| {
                Error::param(format!(
                    "m must be an integer or convergence/table/rip, got `{other}`"
                ))
            }),
        }
    }
}

/// Stop rule with an optional tolerance; `rel_error` without a tolerance
/// uses `1e-5` at exact rank and `1e-2` over rank.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StopSpec {
    RelChange(f64),
    RelError(Option<f64>),
    ItersOnly,
}

impl StopSpec {
    pub fn resolve(self, r: usize, r_star: usize) -> StopRule {
        match self {
            StopSpec::RelChange(t) => StopRule::RelChange(t),
            StopSpec::RelError(Some(t)) => StopRule::RelError(t),
            StopSpec::RelError(None) => StopRule::RelError(if r > r_star { 1e-2 } else { 1e-5 }),
            StopSpec::ItersOnly => StopRule::ItersOnly,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub command: Command,
    pub n: usize,
    pub n3: usize,
    pub r_star: usize,
    /// Estimated ranks to run.
    pub ranks: Vec<usize>,
    pub m: MSpec,
    pub v: f64,
    pub eta: f64,
    pub eta_mode: EtaMode,
    pub max_iters: usize,
    pub stop: StopSpec,
    pub seeds: Vec<u64>,
    pub out: PathBuf,
    pub measurement: MeasurementMode,
    pub trace_every: usize,
    pub record_error_terms: bool,
    pub backend: Backend,
    pub threads: Option<usize>,
    // phase
    pub grid_m: usize,
    pub grid_r: usize,
    pub m_min_frac: f64,
    pub m_max_frac: f64,
    /// Explicit `(m, r_star)` cells; overrides the grid when nonempty.
    pub cells: Vec<(usize, usize)>,
    pub success_tol: f64,
    pub success_min: usize,
    // tables
    pub rank_frac: f64,
    pub ns: Vec<usize>,
    pub vs: Vec<f64>,
    pub r_extra: usize,
    // bench
    pub shapes: Vec<(usize, usize, usize)>,
    pub reps: usize,
    // rip
    pub trials: usize,
}

fn seeds_from(base: u64, count: usize) -> Vec<u64> {
    (0..count as u64).map(|i| base.wrapping_add(i)).collect()
}

impl ExperimentConfig {
    pub fn defaults(command: Command) -> Self {
        let mut c = ExperimentConfig {
            command,
            n: 50,
            n3: 5,
            r_star: 3,
            ranks: vec![3, 5],
            m: MSpec::Convergence,
            v: 0.0,
            eta: 1e-3,
            eta_mode: EtaMode::Fixed,
            max_iters: 1000,
            stop: StopSpec::RelError(None),
            seeds: vec![1],
            out: PathBuf::from("results").join(command.name()),
            measurement: MeasurementMode::PlainGaussian,
            trace_every: 1,
            record_error_terms: false,
            backend: Backend::Auto,
            threads: None,
            grid_m: 10,
            grid_r: 10,
            m_min_frac: 0.01,
            m_max_frac: 1.0,
            cells: Vec::new(),
            success_tol: 1e-2,
            success_min: 5,
            rank_frac: 0.3,
            ns: vec![30, 50],
            vs: vec![0.3, 0.5, 0.7],
            r_extra: 2,
            shapes: vec![(128, 32, 8), (256, 32, 8), (256, 64, 8)],
            reps: 50,
            trials: 50,
        };
        match command {
            Command::Convergence | Command::LemmaCheck => {}
            Command::Phase => {
                c.n = 30;
                c.seeds = seeds_from(1, 10);
                c.stop = StopSpec::RelError(Some(1e-2));
            }
            Command::Tables => {
                c.m = MSpec::Table;
                c.seeds = seeds_from(1, 10);
                c.stop = StopSpec::RelChange(5e-4);
                c.max_iters = 10_000;
            }
            Command::Bench => {}
            Command::Rip => {
                c.n = 12;
                c.n3 = 3;
                c.ranks = vec![2];
                c.m = MSpec::Rip;
                c.seeds = seeds_from(1, 10);
            }
        }
        c
    }

    /// Defaults, then `file` (if any), then `overrides` in order.
    pub fn load(
        command: Command,
        file: Option<&Path>,
        overrides: &[(String, String)],
    ) -> Result<Self> {
        let mut c = Self::defaults(command);
        let mut pairs = Vec::new();
        if let Some(path) = file {
            pairs.extend(parse_pairs(&std::fs::read_to_string(path)?)?);
        }
        pairs.extend(overrides.iter().cloned());
        c.apply(&pairs)?;
        c.validate()?;
        Ok(c)
    }

    pub fn apply(&mut self, pairs: &[(String, String)]) -> Result<()> {
        // `seed` and `repeats` combine, so collect them before building the list.
        let mut base: Option<u64> = None;
        let mut count: Option<usize> = None;
        let mut tol: Option<f64> = None;
        let mut stop: Option<String> = None;
        let mut rho: Option<f64> = None;
        let mut eta_mode: Option<String> = None;
        for (key, value) in pairs {
            let v = value.trim();
            match key.trim() {
                "command" => {
                    let c: Command = v.parse()?;
                    if c != self.command {
                        return Err(Error::param(format!(
                            "config is for `{}` but `{}` was requested",
                            c.name(),
                            self.command.name()
                        )));
                    }
                }
                "n" => self.n = num(key, v)?,
                "n3" => self.n3 = num(key, v)?,
                "r_star" => self.r_star = num(key, v)?,
                "r" | "ranks" => self.ranks = list(key, v)?,
                "m" => self.m = v.parse()?,
                "v" => self.v = num(key, v)?,
                "eta" => self.eta = num(key, v)?,
                "eta_mode" => eta_mode = Some(v.to_string()),
                "rho" => rho = Some(num(key, v)?),
                "max_iters" => self.max_iters = num(key, v)?,
                "stop" => stop = Some(v.to_string()),
                "tol" => tol = Some(num(key, v)?),
                "seeds" => self.seeds = list(key, v)?,
                "seed" => base = Some(num(key, v)?),
                "repeats" => count = Some(num(key, v)?),
                "out" => self.out = PathBuf::from(v),
                "measurement" => self.measurement = v.parse()?,
                "trace_every" => self.trace_every = num(key, v)?,
                "record_error_terms" => self.record_error_terms = boolean(key, v)?,
                "backend" => {
                    self.backend = match v {
                        "auto" => Backend::Auto,
                        "direct" => Backend::Direct,
                        "gram" => Backend::Gram,
                        _ => {
                            return Err(Error::param(format!(
                                "backend must be auto/direct/gram, got `{v}`"
                            )))
                        }
                    }
                }
                "threads" => self.threads = Some(num(key, v)?),
                "grid_m" => self.grid_m = num(key, v)?,
                "grid_r" => self.grid_r = num(key, v)?,
                "m_min_frac" => self.m_min_frac = num(key, v)?,
                "m_max_frac" => self.m_max_frac = num(key, v)?,
                "cells" => self.cells = cells(v)?,
                "success_tol" => self.success_tol = num(key, v)?,
                "success_min" => self.success_min = num(key, v)?,
                "table" => {
                    self.rank_frac = match v {
                        "2" => 0.3,
                        "3" => 0.2,
                        "4" => 0.1,
                        _ => {
                            return Err(Error::param(format!("table must be 2, 3 or 4, got `{v}`")))
                        }
                    }
                }
                "rank_frac" => self.rank_frac = num(key, v)?,
                "ns" => self.ns = list(key, v)?,
                "vs" => self.vs = list(key, v)?,
                "r_extra" => self.r_extra = num(key, v)?,
                "shapes" => self.shapes = shapes(v)?,
                "reps" => self.reps = num(key, v)?,
                "trials" => self.trials = num(key, v)?,
                other => return Err(Error::param(format!("unknown config key `{other}`"))),
            }
        }
        if base.is_some() || count.is_some() {
            let base = base.unwrap_or_else(|| self.seeds.first().copied().unwrap_or(1));
            self.seeds = seeds_from(base, count.unwrap_or(self.seeds.len().max(1)));
        }
        if let Some(mode) = eta_mode {
            self.eta_mode = match mode.as_str() {
                "fixed" => EtaMode::Fixed,
                "auto" => EtaMode::Auto {
                    rho: rho.unwrap_or(10.0),
                },
                _ => {
                    return Err(Error::param(format!(
                        "eta_mode must be fixed or auto, got `{mode}`"
                    )))
                }
            };
        } else if let (Some(r), EtaMode::Auto { .. }) = (rho, self.eta_mode) {
            self.eta_mode = EtaMode::Auto { rho: r };
        }
        let stop_name = stop.unwrap_or_else(|| {
            match self.stop {
                StopSpec::RelChange(_) => "rel_change",
                StopSpec::RelError(_) => "rel_error",
                StopSpec::ItersOnly => "iters_only",
            }
            .to_string()
        });
        let current_tol = match self.stop {
            StopSpec::RelChange(t) => Some(t),
            StopSpec::RelError(t) => t,
            StopSpec::ItersOnly => None,
        };
        let tol = tol.or(current_tol);
        self.stop = match stop_name.as_str() {
            "rel_change" => StopSpec::RelChange(tol.unwrap_or(5e-4)),
            "rel_error" => StopSpec::RelError(tol),
            "iters_only" => StopSpec::ItersOnly,
            other => {
                return Err(Error::param(format!(
                    "stop must be rel_change/rel_error/iters_only, got `{other}`"
                )))
            }
        };
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("n", self.n),
            ("n3", self.n3),
            ("trace_every", self.trace_every),
        ];
        for (name, value) in positive {
            if value == 0 {
                return Err(Error::param(format!("{name} must be at least 1")));
            }
        }
        if self.r_star == 0 || self.r_star > self.n {
            return Err(Error::param(format!(
                "r_star = {} outside 1..={}",
                self.r_star, self.n
            )));
        }
        if self.ranks.iter().any(|&r| r == 0 || r > self.n) {
            return Err(Error::param(format!(
                "ranks {:?} must lie in 1..={}",
                self.ranks, self.n
            )));
        }
        if !(self.v >= 0.0 && self.v.is_finite()) {
            return Err(Error::param(format!(
                "noise level v = {} must be nonnegative",
                self.v
            )));
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::param(format!("eta = {} must be positive", self.eta)));
        }
        if let EtaMode::Auto { rho } = self.eta_mode {
            if rho < 10.0 {
                return Err(Error::param(format!("rho = {rho} must be at least 10")));
            }
        }
        if let StopSpec::RelChange(t) | StopSpec::RelError(Some(t)) = self.stop {
            if !(t > 0.0 && t.is_finite()) {
                return Err(Error::param(format!(
                    "stopping tolerance {t} must be positive"
                )));
            }
        }
        if self.threads == Some(0) {
            return Err(Error::param("threads must be at least 1"));
        }
        if !(0.0 < self.m_min_frac && self.m_min_frac <= self.m_max_frac) {
            return Err(Error::param("need 0 < m_min_frac <= m_max_frac"));
        }
        if self
            .shapes
            .iter()
            .any(|&(n, r, n3)| n == 0 || r == 0 || n3 == 0 || r > n)
        {
            return Err(Error::param("bench shapes need 1 <= r <= n and n3 >= 1"));
        }
        if self.vs.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return Err(Error::param("noise levels must be nonnegative"));
        }
        Ok(())
    }

    /// The resolved configuration as `key = value` lines.
    pub fn to_pairs(&self) -> Vec<(String, String)> {
        let join = |v: Vec<String>| v.join(",");
        let (stop, tol) = match self.stop {
            StopSpec::RelChange(t) => ("rel_change", t.to_string()),
            StopSpec::RelError(t) => (
                "rel_error",
                t.map(|t| t.to_string()).unwrap_or_else(|| "auto".into()),
            ),
            StopSpec::ItersOnly => ("iters_only", "none".into()),
        };
        let (eta_mode, rho) = match self.eta_mode {
            EtaMode::Fixed => ("fixed", "none".to_string()),
            EtaMode::Auto { rho } => ("auto", rho.to_string()),
        };
        let backend = match self.backend {
            Backend::Auto => "auto",
            Backend::Direct => "direct",
            Backend::Gram => "gram",
        };
        let mut out = vec![
            ("command", self.command.name().to_string()),
            ("n", self.n.to_string()),
            ("n3", self.n3.to_string()),
            ("r_star", self.r_star.to_string()),
            (
                "ranks",
                join(self.ranks.iter().map(|r| r.to_string()).collect()),
            ),
            ("m", self.m.to_string()),
            ("v", self.v.to_string()),
            ("eta", self.eta.to_string()),
            ("eta_mode", eta_mode.to_string()),
            ("rho", rho),
            ("max_iters", self.max_iters.to_string()),
            ("stop", stop.to_string()),
            ("tol", tol),
            (
                "seeds",
                join(self.seeds.iter().map(|s| s.to_string()).collect()),
            ),
            ("out", self.out.display().to_string()),
            ("measurement", self.measurement.to_string()),
            ("trace_every", self.trace_every.to_string()),
            ("record_error_terms", self.record_error_terms.to_string()),
            ("backend", backend.to_string()),
            (
                "threads",
                self.threads
                    .map(|t| t.to_string())
                    .unwrap_or_else(|| "default".into()),
            ),
        ];
        match self.command {
            Command::Phase => out.extend([
                ("grid_m", self.grid_m.to_string()),
                ("grid_r", self.grid_r.to_string()),
                ("m_min_frac", self.m_min_frac.to_string()),
                ("m_max_frac", self.m_max_frac.to_string()),
                (
                    "cells",
                    self.cells
                        .iter()
                        .map(|(m, r)| format!("{m}:{r}"))
                        .collect::<Vec<_>>()
                        .join(";"),
                ),
                ("success_tol", self.success_tol.to_string()),
                ("success_min", self.success_min.to_string()),
            ]),
            Command::Tables => out.extend([
                ("rank_frac", self.rank_frac.to_string()),
                ("ns", join(self.ns.iter().map(|n| n.to_string()).collect())),
                ("vs", join(self.vs.iter().map(|v| v.to_string()).collect())),
                ("r_extra", self.r_extra.to_string()),
            ]),
            Command::Bench => out.extend([
                (
                    "shapes",
                    self.shapes
                        .iter()
                        .map(|(n, r, n3)| format!("{n}:{r}:{n3}"))
                        .collect::<Vec<_>>()
                        .join(";"),
                ),
                ("reps", self.reps.to_string()),
            ]),
            Command::Rip => out.push(("trials", self.trials.to_string())),
            Command::Convergence | Command::LemmaCheck => {}
        }
        out.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
    }

    pub fn serialize(&self) -> String {
        // `auto`/`none`/`default` placeholders are dropped so the file reloads as-is.
        self.to_pairs()
            .into_iter()
            .filter(|(k, v)| {
                !matches!(
                    (k.as_str(), v.as_str()),
                    ("tol", "auto" | "none") | ("rho", "none") | ("threads", "default")
                )
            })
            .filter(|(k, v)| !(k == "cells" && v.is_empty()))
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }
}

/// Parses `key = value` lines; `#` starts a comment.
pub fn parse_pairs(text: &str) -> Result<Vec<(String, String)>> {
    let mut pairs = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            Error::param(format!(
                "line {}: expected key = value, got `{line}`",
                lineno + 1
            ))
        })?;
        pairs.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(pairs)
}

fn num<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::param(format!("bad value `{v}` for `{key}`")))
}

fn list<T: FromStr>(key: &str, v: &str) -> Result<Vec<T>> {
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| num(key, s))
        .collect()
}

fn boolean(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(Error::param(format!("bad boolean `{v}` for `{key}`"))),
    }
}

fn cells(v: &str) -> Result<Vec<(usize, usize)>> {
    v.split(';')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|c| {
            let (m, r) = c
                .split_once(':')
                .ok_or_else(|| Error::param(format!("cell `{c}` must be m:r_star")))?;
            Ok((num("cells", m.trim())?, num("cells", r.trim())?))
        })
        .collect()
}

fn shapes(v: &str) -> Result<Vec<(usize, usize, usize)>> {
    v.split(';')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            let parts: Vec<usize> = s
                .split(':')
                .map(|p| num("shapes", p.trim()))
                .collect::<Result<_>>()?;
            match parts[..] {
                [n, r, n3] => Ok((n, r, n3)),
                _ => Err(Error::param(format!("shape `{s}` must be n:r:n3"))),
            }
        })
        .collect()
}
