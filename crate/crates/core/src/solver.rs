//! Spectral initialization and factorized gradient descent on
//! `1/4 |y - M(F * F^*)|^2`, plus the population step on `1/4 |F * F^* - X_star|_F^2`.
//!
//! The update is `F <- F - eta * sym(G) * F` with `G = M^*(M(F * F^*) - y)`.
//! For symmetric measurement tensors `sym(G) = G`; for plain Gaussian ones it
//! makes the step the exact gradient. `raw_eq6` uses `G` unsymmetrized.

use std::sync::Arc;
use std::time::Instant;

use crate::decomposition::project_psd_rank_r;
use crate::diagnostics::{error_terms, subspace_basis, ErrorTerms, SubspaceBasis};
use crate::error::{Error, Result};
use crate::sensing::{gram_bytes, GramOperator, ProblemInstance};
use crate::t_algebra::{fft3, gram_product, ifft3, spectral_norm, sym, Tensor3};

/// Factor norm, relative to the initial one, beyond which a run is declared divergent.
pub const DIVERGENCE_FACTOR: f64 = 1e8;
pub const DEFAULT_ETA: f64 = 1e-3;
pub const DEFAULT_GRAM_BUDGET: usize = 1536 << 20;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StopRule {
    /// Stop once `|X_{t+1} - X_t|_F / |X_t|_F <= tol`.
    RelChange(f64),
    /// Stop once `|X_t - X_star|_F / |X_star|_F <= tol`.
    RelError(f64),
    ItersOnly,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum EtaMode {
    Fixed,
    /// `eta = 1 / (rho * sigma1_hat)` with `sigma1_hat = |sym(M^*(y))|`.
    Auto {
        rho: f64,
    },
}

/// How residual gradients are evaluated. Both give the same iterates up to
/// rounding; `Gram` trades one `O(m d^2)` setup for `O(d^2)` iterations.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Backend {
    /// `Gram` when it fits the memory budget and `raw_eq6` is off.
    #[default]
    Auto,
    /// Forward map and adjoint on every iteration.
    Direct,
    Gram,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FgdConfig {
    pub r: usize,
    pub eta: f64,
    pub max_iters: usize,
    pub stop: StopRule,
    pub eta_mode: EtaMode,
    pub trace_every: usize,
    pub record_error_terms: bool,
    pub raw_eq6: bool,
    pub backend: Backend,
    pub gram_budget: usize,
}

impl FgdConfig {
    pub fn new(r: usize) -> Self {
        FgdConfig {
            r,
            eta: DEFAULT_ETA,
            max_iters: 1000,
            stop: StopRule::RelChange(5e-4),
            eta_mode: EtaMode::Fixed,
            trace_every: 1,
            record_error_terms: false,
            raw_eq6: false,
            backend: Backend::Auto,
            gram_budget: DEFAULT_GRAM_BUDGET,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.r == 0 {
            return Err(Error::param("rank r must be at least 1"));
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::param(format!(
                "step size eta = {} must be positive",
                self.eta
            )));
        }
        if let EtaMode::Auto { rho } = self.eta_mode {
            if !(rho >= 10.0 && rho.is_finite()) {
                return Err(Error::param(format!(
                    "auto step size needs rho >= 10, got {rho}"
                )));
            }
        }
        match self.stop {
            StopRule::RelChange(tol) | StopRule::RelError(tol)
                if !(tol > 0.0 && tol.is_finite()) =>
            {
                return Err(Error::param(format!(
                    "stopping tolerance {tol} must be positive"
                )));
            }
            _ => {}
        }
        if self.trace_every == 0 {
            return Err(Error::param("trace_every must be at least 1"));
        }
        if self.raw_eq6 && self.backend == Backend::Gram {
            return Err(Error::param("raw_eq6 needs the direct backend"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TraceRecord {
    pub t: usize,
    pub rel_error: f64,
    /// `1/4 |y - M(X_t)|^2`.
    pub objective: f64,
    /// `|X_t - X_{t-1}|_F / |X_{t-1}|_F`; absent at `t = 0`.
    pub rel_change: Option<f64>,
    /// Seconds since the solve started.
    pub wall_time: f64,
    pub error_terms: Option<ErrorTerms>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConvergenceTrace {
    pub records: Vec<TraceRecord>,
}

impl ConvergenceTrace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn iterations(&self) -> Vec<usize> {
        self.records.iter().map(|r| r.t).collect()
    }

    pub fn rel_errors(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.rel_error).collect()
    }

    pub fn objectives(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.objective).collect()
    }

    pub fn last(&self) -> Option<&TraceRecord> {
        self.records.last()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopReason {
    RelChange,
    RelError,
    MaxIters,
}

impl std::fmt::Display for StopReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            StopReason::RelChange => "rel_change",
            StopReason::RelError => "rel_error",
            StopReason::MaxIters => "max_iters",
        })
    }
}

#[derive(Clone, Debug)]
pub struct SolveResult {
    pub f_final: Tensor3,
    pub x_final: Tensor3,
    pub iterations: usize,
    pub trace: ConvergenceTrace,
    pub stop_reason: StopReason,
    /// Step size actually used.
    pub eta: f64,
    pub backend: Backend,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopDecision {
    Continue,
    Stop(StopReason),
}

/// Evaluates the stopping rule on the latest record after `iters` completed iterations.
pub fn stop_check(last: &TraceRecord, iters: usize, cfg: &FgdConfig) -> StopDecision {
    match cfg.stop {
        StopRule::RelChange(tol) if last.rel_change.is_some_and(|c| c <= tol) => {
            return StopDecision::Stop(StopReason::RelChange);
        }
        StopRule::RelError(tol) if last.rel_error <= tol => {
            return StopDecision::Stop(StopReason::RelError)
        }
        _ => {}
    }
    if iters >= cfg.max_iters {
        StopDecision::Stop(StopReason::MaxIters)
    } else {
        StopDecision::Continue
    }
}

/// `F_0 = P_r(sym(M^*(y)))`.
pub fn spectral_init(p: &ProblemInstance, r: usize) -> Result<Tensor3> {
    project_psd_rank_r(&sym(&p.ensemble.adjoint(&p.y)?)?, r)
}

/// `F - eta * G * F`, evaluated in the spectral domain.
fn descend(f: &Tensor3, g: &Tensor3, eta: f64) -> Result<Tensor3> {
    let gf = ifft3(&fft3(g).matmul(&fft3(f))?)?;
    f.axpy(-eta, &gf)
}

fn check_factor(f: &Tensor3, reference: f64, iteration: usize) -> Result<()> {
    let norm = f.fro_norm();
    if !norm.is_finite() || norm > DIVERGENCE_FACTOR * reference {
        return Err(Error::Diverged { iteration, norm });
    }
    Ok(())
}

enum Oracle<'a> {
    Direct { p: &'a ProblemInstance, raw: bool },
    Gram(Arc<GramOperator>),
}

impl Oracle<'_> {
    /// Gradient direction and objective at `X`.
    fn eval(&self, x: &Tensor3) -> Result<(Tensor3, f64)> {
        match self {
            Oracle::Direct { p, raw } => {
                let mx = p.ensemble.measure(x)?;
                let r: Vec<f64> = mx.iter().zip(&p.y).map(|(a, b)| a - b).collect();
                let objective = 0.25 * r.iter().map(|v| v * v).sum::<f64>();
                let g = p.ensemble.adjoint(&r)?;
                Ok((if *raw { g } else { sym(&g)? }, objective))
            }
            Oracle::Gram(op) => Ok(op.residual_gradient(x)),
        }
    }
}

/// One FGD step `F - eta * sym(M^*(M(F * F^*) - y)) * F`.
pub fn fgd_step(f: &Tensor3, p: &ProblemInstance, eta: f64) -> Result<Tensor3> {
    fgd_step_with(f, p, eta, false)
}

/// As [`fgd_step`]; `raw_eq6` drops the symmetrization of the residual gradient.
pub fn fgd_step_with(f: &Tensor3, p: &ProblemInstance, eta: f64, raw_eq6: bool) -> Result<Tensor3> {
    let dims = p.x_star.dims();
    if f.dims().n1 != dims.n1 || f.dims().n3 != dims.n3 {
        return Err(Error::shape(format!(
            "factor {} does not fit problem {}",
            f.dims(),
            dims
        )));
    }
    let (g, _) = Oracle::Direct { p, raw: raw_eq6 }.eval(&gram_product(f)?)?;
    let next = descend(f, &g, eta)?;
    check_factor(&next, f.fro_norm(), 1)?;
    Ok(next)
}

/// `F - eta * (F * F^* - X_star) * F`.
pub fn population_step(f: &Tensor3, x_star: &Tensor3, eta: f64) -> Result<Tensor3> {
    descend(f, &gram_product(f)?.sub(x_star)?, eta)
}

/// `1/4 |y - M(F * F^*)|^2` by direct evaluation.
pub fn objective(f: &Tensor3, p: &ProblemInstance) -> Result<f64> {
    Ok(Oracle::Direct { p, raw: false }.eval(&gram_product(f)?)?.1)
}

fn resolve_backend(p: &ProblemInstance, cfg: &FgdConfig) -> Backend {
    match cfg.backend {
        Backend::Auto
            if !cfg.raw_eq6
                && (p.gram.is_some() || gram_bytes(p.n(), p.n3()) <= cfg.gram_budget) =>
        {
            Backend::Gram
        }
        Backend::Auto => Backend::Direct,
        other => other,
    }
}

/// Algorithm: spectral initialization, then FGD until the stopping rule fires.
pub fn fgd_solve(p: &ProblemInstance, cfg: &FgdConfig) -> Result<SolveResult> {
    cfg.validate()?;
    if cfg.r > p.n() {
        return Err(Error::param(format!(
            "rank r = {} exceeds n = {}",
            cfg.r,
            p.n()
        )));
    }
    let start = Instant::now();
    let backend = resolve_backend(p, cfg);
    let (oracle, adj) = match backend {
        Backend::Gram => {
            let op = match &p.gram {
                Some(op) => Arc::clone(op),
                None => Arc::new(GramOperator::build(&p.ensemble, &p.y, cfg.gram_budget)?),
            };
            let adj = op.adjoint_observations();
            (Oracle::Gram(op), adj)
        }
        _ => (
            Oracle::Direct {
                p,
                raw: cfg.raw_eq6,
            },
            sym(&p.ensemble.adjoint(&p.y)?)?,
        ),
    };
    let eta = match cfg.eta_mode {
        EtaMode::Fixed => cfg.eta,
        EtaMode::Auto { rho } => {
            let s = spectral_norm(&adj)?;
            if s == 0.0 {
                return Err(Error::ZeroTensor);
            }
            1.0 / (rho * s)
        }
    };
    let mut f = project_psd_rank_r(&adj, cfg.r)?;
    drop(adj);
    let f0_norm = f.fro_norm().max(f64::MIN_POSITIVE);
    let basis: Option<SubspaceBasis> = if cfg.record_error_terms {
        Some(subspace_basis(&p.x_star, p.r_star())?)
    } else {
        None
    };
    let x_star_norm = p.x_star.fro_norm();

    let mut x = gram_product(&f)?;
    let (mut g, obj) = oracle.eval(&x)?;
    let terms = |f: &Tensor3| -> Result<Option<ErrorTerms>> {
        basis
            .as_ref()
            .map(|b| error_terms(f, b, &p.x_star))
            .transpose()
    };
    let mut trace = ConvergenceTrace::default();
    trace.records.push(TraceRecord {
        t: 0,
        rel_error: x.sub(&p.x_star)?.fro_norm() / x_star_norm,
        objective: obj,
        rel_change: None,
        wall_time: start.elapsed().as_secs_f64(),
        error_terms: terms(&f)?,
    });
    let mut iters = 0;
    let mut reason = match stop_check(&trace.records[0], 0, cfg) {
        StopDecision::Stop(r) => Some(r),
        StopDecision::Continue => None,
    };
    while reason.is_none() {
        let f_next = descend(&f, &g, eta)?;
        iters += 1;
        check_factor(&f_next, f0_norm, iters)?;
        let x_next = gram_product(&f_next)?;
        let x_norm = x.fro_norm();
        let rel_change = x_next.sub(&x)?.fro_norm() / if x_norm > 0.0 { x_norm } else { 1.0 };
        let (g_next, obj) = oracle.eval(&x_next)?;
        let record = TraceRecord {
            t: iters,
            rel_error: x_next.sub(&p.x_star)?.fro_norm() / x_star_norm,
            objective: obj,
            rel_change: Some(rel_change),
            wall_time: 0.0,
            error_terms: None,
        };
        f = f_next;
        x = x_next;
        g = g_next;
        reason = match stop_check(&record, iters, cfg) {
            StopDecision::Stop(r) => Some(r),
            StopDecision::Continue => None,
        };
        if reason.is_some() || iters % cfg.trace_every == 0 {
            trace.records.push(TraceRecord {
                wall_time: start.elapsed().as_secs_f64(),
                error_terms: terms(&f)?,
                ..record
            });
        }
    }
    Ok(SolveResult {
        f_final: f,
        x_final: x,
        iterations: iters,
        trace,
        stop_reason: reason.expect("loop exits with a reason"),
        eta,
        backend,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sensing::gen_problem;

    #[test]
    fn config_validation() {
        assert!(FgdConfig::new(2).validate().is_ok());
        assert!(FgdConfig {
            eta: 0.0,
            ..FgdConfig::new(2)
        }
        .validate()
        .is_err());
        assert!(FgdConfig {
            eta_mode: EtaMode::Auto { rho: 5.0 },
            ..FgdConfig::new(2)
        }
        .validate()
        .is_err());
        assert!(FgdConfig {
            r: 0,
            ..FgdConfig::new(2)
        }
        .validate()
        .is_err());
        assert!(FgdConfig {
            raw_eq6: true,
            backend: Backend::Gram,
            ..FgdConfig::new(2)
        }
        .validate()
        .is_err());
    }

    #[test]
    fn stop_rules() {
        let rec = |c: Option<f64>, e: f64| TraceRecord {
            t: 1,
            rel_error: e,
            objective: 0.0,
            rel_change: c,
            wall_time: 0.0,
            error_terms: None,
        };
        let cfg = FgdConfig {
            stop: StopRule::RelChange(1e-3),
            ..FgdConfig::new(1)
        };
        assert_eq!(
            stop_check(&rec(Some(1e-4), 1.0), 1, &cfg),
            StopDecision::Stop(StopReason::RelChange)
        );
        assert_eq!(stop_check(&rec(None, 1.0), 0, &cfg), StopDecision::Continue);
        let cfg = FgdConfig {
            stop: StopRule::ItersOnly,
            max_iters: 5,
            ..FgdConfig::new(1)
        };
        assert_eq!(
            stop_check(&rec(Some(0.0), 0.0), 4, &cfg),
            StopDecision::Continue
        );
        assert_eq!(
            stop_check(&rec(Some(0.0), 0.0), 5, &cfg),
            StopDecision::Stop(StopReason::MaxIters)
        );
        let cfg = FgdConfig {
            stop: StopRule::RelError(1e-5),
            ..FgdConfig::new(1)
        };
        assert_eq!(
            stop_check(&rec(Some(1.0), 1e-6), 3, &cfg),
            StopDecision::Stop(StopReason::RelError)
        );
    }

    #[test]
    fn zero_step_and_fixed_point() {
        let p = gen_problem(5, 3, 2, 60, 0.0, 1).unwrap();
        let f = Tensor3::random_normal((5, 2, 3), 1.0, &mut crate::sensing::stream_rng(1, 0));
        assert_eq!(fgd_step(&f, &p, 0.0).unwrap(), f);
        let at_truth = fgd_step(&p.f_star, &p, 1e-3).unwrap();
        assert!(at_truth.sub(&p.f_star).unwrap().fro_norm() < 1e-10 * p.f_star.fro_norm());
        let pop = population_step(&p.f_star, &p.x_star, 1e-3).unwrap();
        assert!(pop.sub(&p.f_star).unwrap().fro_norm() < 1e-10 * p.f_star.fro_norm());
    }

    #[test]
    fn zero_iterations_gives_initial_point_only() {
        let p = gen_problem(5, 3, 2, 80, 0.0, 2).unwrap();
        let res = fgd_solve(
            &p,
            &FgdConfig {
                max_iters: 0,
                ..FgdConfig::new(2)
            },
        )
        .unwrap();
        assert_eq!(res.iterations, 0);
        assert_eq!(res.trace.len(), 1);
        assert_eq!(res.stop_reason, StopReason::MaxIters);
    }

    #[test]
    fn huge_step_diverges() {
        let p = gen_problem(5, 3, 2, 80, 0.0, 3).unwrap();
        let cfg = FgdConfig {
            eta: 10.0,
            stop: StopRule::ItersOnly,
            max_iters: 200,
            ..FgdConfig::new(2)
        };
        assert!(matches!(fgd_solve(&p, &cfg), Err(Error::Diverged { .. })));
    }

    #[test]
    fn backends_agree() {
        let p = gen_problem(6, 3, 2, 150, 0.01, 4).unwrap();
        let base = FgdConfig {
            stop: StopRule::ItersOnly,
            max_iters: 20,
            ..FgdConfig::new(3)
        };
        let a = fgd_solve(
            &p,
            &FgdConfig {
                backend: Backend::Direct,
                ..base.clone()
            },
        )
        .unwrap();
        let b = fgd_solve(
            &p,
            &FgdConfig {
                backend: Backend::Gram,
                ..base
            },
        )
        .unwrap();
        assert_eq!(b.backend, Backend::Gram);
        assert!(a.x_final.sub(&b.x_final).unwrap().fro_norm() <= 1e-9 * a.x_final.fro_norm());
        for (ra, rb) in a.trace.records.iter().zip(&b.trace.records) {
            assert!((ra.objective - rb.objective).abs() <= 1e-8 * ra.objective.max(1.0));
        }
    }
}
