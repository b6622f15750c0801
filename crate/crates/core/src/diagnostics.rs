//! Empirical checks of the population/sample error analysis: subspace split
//! of the factor, the error triple and its sandwich bound, population
//! updates in split coordinates, the sample deviation, and rate fitting.

use crate::decomposition::{SpectralEig, DEFAULT_RANK_TOL, DEFAULT_SYM_TOL};
use crate::error::{Error, Result};
use crate::sensing::ProblemInstance;
use crate::t_algebra::{conj_transpose, gram_product, spectral_norm, sym, t_product, Tensor3};

/// Absolute slack of the sandwich check, scaled by `max(1, |X_star|)`.
pub const SANDWICH_SLACK: f64 = 1e-8;

/// `X_star = [U V] * diag(D_star, 0) * [U V]^*`.
#[derive(Clone, Debug)]
pub struct SubspaceBasis {
    pub u: Tensor3,
    pub v: Tensor3,
    pub d_star: Tensor3,
    pub r_star: usize,
    /// `|X_star|`, the scale for tolerances.
    pub sigma1: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ErrorTerms {
    /// `|D_star - S * S^*|`
    pub d_ss: f64,
    /// `|S * T^*|`
    pub st: f64,
    /// `|T * T^*|`
    pub tt: f64,
    /// `max(d_ss, st, tt)`
    pub e_t: f64,
    /// `|F * F^* - X_star|`
    pub delta_norm: f64,
}

pub fn subspace_basis(x_star: &Tensor3, r_star: usize) -> Result<SubspaceBasis> {
    let n = x_star.dims().n1;
    if r_star == 0 || r_star >= n {
        return Err(Error::param(format!(
            "subspace split needs 1 <= r_star < n, got r_star = {r_star}, n = {n}"
        )));
    }
    let eig = SpectralEig::of(x_star, DEFAULT_SYM_TOL)?;
    let sigma1 = eig.max_abs();
    if sigma1 == 0.0 {
        return Err(Error::ZeroTensor);
    }
    let tol = DEFAULT_RANK_TOL * sigma1;
    for values in &eig.values {
        if values[r_star].abs() > tol {
            return Err(Error::RankMismatch {
                expected: r_star,
                index: r_star,
                value: values[r_star],
            });
        }
    }
    let top = eig
        .values
        .iter()
        .map(|v| v[r_star - 1])
        .fold(f64::NEG_INFINITY, f64::max);
    if top <= tol {
        return Err(Error::RankMismatch {
            expected: r_star,
            index: r_star - 1,
            value: top,
        });
    }
    Ok(SubspaceBasis {
        u: eig.vectors_tensor(0..r_star)?,
        v: eig.vectors_tensor(r_star..n)?,
        d_star: eig.values_tensor(r_star)?,
        r_star,
        sigma1,
    })
}

/// `(S, T) = (U^* * F, V^* * F)`.
pub fn subspace_split(f: &Tensor3, b: &SubspaceBasis) -> Result<(Tensor3, Tensor3)> {
    Ok((
        t_product(&conj_transpose(&b.u), f)?,
        t_product(&conj_transpose(&b.v), f)?,
    ))
}

fn outer(a: &Tensor3, b: &Tensor3) -> Result<Tensor3> {
    t_product(a, &conj_transpose(b))
}

/// The error triple, checked against `e_t <= delta <= 4 e_t` up to
/// [`SANDWICH_SLACK`].
pub fn error_terms(f: &Tensor3, b: &SubspaceBasis, x_star: &Tensor3) -> Result<ErrorTerms> {
    let (s, t) = subspace_split(f, b)?;
    let d_ss = spectral_norm(&b.d_star.sub(&outer(&s, &s)?)?)?;
    let st = spectral_norm(&outer(&s, &t)?)?;
    let tt = spectral_norm(&outer(&t, &t)?)?;
    let e_t = d_ss.max(st).max(tt);
    let delta_norm = spectral_norm(&gram_product(f)?.sub(x_star)?)?;
    let slack = SANDWICH_SLACK * b.sigma1.max(1.0);
    if e_t > delta_norm + slack || delta_norm > 4.0 * e_t + slack {
        return Err(Error::SandwichViolated {
            e_t,
            delta: delta_norm,
        });
    }
    Ok(ErrorTerms {
        d_ss,
        st,
        tt,
        e_t,
        delta_norm,
    })
}

/// Population update in split coordinates:
/// `S - eta (S S^* S + S T^* T - D S)` and `T - eta (T T^* T + T S^* S)`.
pub fn tilde_update(
    s: &Tensor3,
    t: &Tensor3,
    b: &SubspaceBasis,
    eta: f64,
) -> Result<(Tensor3, Tensor3)> {
    let sts = t_product(&conj_transpose(s), s)?;
    let ttt = t_product(&conj_transpose(t), t)?;
    let cross = sts.add(&ttt)?;
    let s_grad = t_product(s, &cross)?.sub(&t_product(&b.d_star, s)?)?;
    let t_grad = t_product(t, &cross)?;
    Ok((s.axpy(-eta, &s_grad)?, t.axpy(-eta, &t_grad)?))
}

/// `sym(M^*(M(Delta) - s)) - Delta` with `Delta = F * F^* - X_star`.
pub fn sample_deviation(f: &Tensor3, p: &ProblemInstance) -> Result<Tensor3> {
    let delta = gram_product(f)?.sub(&p.x_star)?;
    let md = p.ensemble.measure(&delta)?;
    let r: Vec<f64> = md.iter().zip(&p.noise).map(|(a, s)| a - s).collect();
    sym(&p.ensemble.adjoint(&r)?)?.sub(&delta)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RateFit {
    /// `log e_t ~ a + slope * t`.
    Linear { slope: f64, r2: f64 },
    /// `e_t ~ c / (t + t0)`.
    Sublinear { c: f64, t0: f64, r2: f64 },
}

impl RateFit {
    pub fn is_linear(&self) -> bool {
        matches!(self, RateFit::Linear { .. })
    }

    pub fn r2(&self) -> f64 {
        match *self {
            RateFit::Linear { r2, .. } | RateFit::Sublinear { r2, .. } => r2,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            RateFit::Linear { .. } => "linear",
            RateFit::Sublinear { .. } => "sublinear",
        }
    }
}

pub const RATE_FIT_MIN_POINTS: usize = 20;
/// Points below this fraction of the largest value are treated as round-off.
pub const RATE_FIT_FLOOR: f64 = 1e-10;

fn least_squares(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (my - slope * mx, slope)
}

fn r_squared(y: &[f64], fit: impl Fn(usize) -> f64) -> f64 {
    let n = y.len() as f64;
    let my = y.iter().sum::<f64>() / n;
    let ss_tot: f64 = y.iter().map(|v| (v - my) * (v - my)).sum();
    let ss_res: f64 = y
        .iter()
        .enumerate()
        .map(|(i, v)| (v - fit(i)).powi(2))
        .sum();
    if ss_tot > 0.0 {
        1.0 - ss_res / ss_tot
    } else if ss_res == 0.0 {
        1.0
    } else {
        f64::NEG_INFINITY
    }
}

/// Classifies the decay of `(t, e_t)` over the tail half of the points above
/// the round-off floor. Both models are scored by r² of `log e_t`.
pub fn rate_fit_series(ts: &[f64], es: &[f64]) -> Result<RateFit> {
    if ts.len() != es.len() {
        return Err(Error::shape(format!(
            "{} times for {} values",
            ts.len(),
            es.len()
        )));
    }
    let peak = es
        .iter()
        .copied()
        .filter(|e| e.is_finite())
        .fold(0.0f64, f64::max);
    let points: Vec<(f64, f64)> = ts
        .iter()
        .zip(es)
        .filter(|(_, &e)| e.is_finite() && e > 0.0 && e > RATE_FIT_FLOOR * peak)
        .map(|(&t, &e)| (t, e))
        .collect();
    if points.len() < RATE_FIT_MIN_POINTS {
        return Err(Error::InsufficientData(format!(
            "{} usable points, need {RATE_FIT_MIN_POINTS}",
            points.len()
        )));
    }
    let tail = &points[points.len() / 2..];
    let t: Vec<f64> = tail.iter().map(|p| p.0).collect();
    let log_e: Vec<f64> = tail.iter().map(|p| p.1.ln()).collect();

    let (a, slope) = least_squares(&t, &log_e);
    let linear_r2 = r_squared(&log_e, |i| a + slope * t[i]);

    let inv: Vec<f64> = tail.iter().map(|p| 1.0 / p.1).collect();
    let (alpha, beta) = least_squares(&t, &inv);
    let sub_r2 = if beta > 0.0 && t.iter().all(|&ti| alpha + beta * ti > 0.0) {
        r_squared(&log_e, |i| -(alpha + beta * t[i]).ln())
    } else {
        f64::NEG_INFINITY
    };
    if sub_r2 > linear_r2 {
        Ok(RateFit::Sublinear {
            c: 1.0 / beta,
            t0: alpha / beta,
            r2: sub_r2,
        })
    } else {
        Ok(RateFit::Linear {
            slope,
            r2: linear_r2,
        })
    }
}

/// [`rate_fit_series`] on the relative-error column of a trace.
pub fn rate_fit(trace: &crate::solver::ConvergenceTrace) -> Result<RateFit> {
    let ts: Vec<f64> = trace.records.iter().map(|r| r.t as f64).collect();
    rate_fit_series(&ts, &trace.rel_errors())
}
