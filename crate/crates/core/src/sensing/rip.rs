use rand::Rng;

use super::ensemble::{
    Materialization, MeasurementEnsemble, MeasurementMode, DEFAULT_DENSE_BUDGET,
};
use super::seeds::{stream_rng, sub_seed, SeedTag};
use crate::error::{Error, Result};
use crate::t_algebra::{conj_transpose, t_product, Tensor3};

#[derive(Clone, Debug, PartialEq)]
pub struct RipEstimate {
    pub r: usize,
    pub trials: usize,
    /// `max_t |ratio_t - 1|`.
    pub delta_hat: f64,
    /// `|M(X_t)|^2 / |X_t|_F^2` per trial.
    pub ratio_samples: Vec<f64>,
}

impl RipEstimate {
    pub fn from_ratios(r: usize, ratio_samples: Vec<f64>) -> Self {
        let delta_hat = ratio_samples
            .iter()
            .fold(0.0f64, |m, q| m.max((q - 1.0).abs()));
        RipEstimate {
            r,
            trials: ratio_samples.len(),
            delta_hat,
            ratio_samples,
        }
    }
}

/// Isometry ratios of `ens` on the given (nonzero) tensors.
pub fn rip_ratios(ens: &MeasurementEnsemble, tensors: &[Tensor3]) -> Result<Vec<f64>> {
    tensors
        .iter()
        .map(|x| {
            let norm2 = x.fro_norm().powi(2);
            if norm2 == 0.0 {
                return Err(Error::ZeroTensor);
            }
            let y = ens.measure(x)?;
            Ok(y.iter().map(|v| v * v).sum::<f64>() / norm2)
        })
        .collect()
}

/// Unit-Frobenius `F * G^*` with Gaussian `F, G` of shape `n x r x n3`.
pub fn random_low_rank<R: Rng + ?Sized>(
    n: usize,
    n3: usize,
    r: usize,
    rng: &mut R,
) -> Result<Tensor3> {
    let f = Tensor3::random_normal((n, r, n3), 1.0, rng);
    let g = Tensor3::random_normal((n, r, n3), 1.0, rng);
    let x = t_product(&f, &conj_transpose(&g))?;
    let norm = x.fro_norm();
    Ok(x.scale(1.0 / norm))
}

/// Monte-Carlo estimate of the T-RIP constant `delta_r` for a fresh
/// plain Gaussian ensemble.
pub fn empirical_rip(
    n: usize,
    n3: usize,
    r: usize,
    m: usize,
    trials: usize,
    seed: u64,
) -> Result<RipEstimate> {
    empirical_rip_with_mode(n, n3, r, m, trials, seed, MeasurementMode::PlainGaussian)
}

pub fn empirical_rip_with_mode(
    n: usize,
    n3: usize,
    r: usize,
    m: usize,
    trials: usize,
    seed: u64,
    mode: MeasurementMode,
) -> Result<RipEstimate> {
    if trials == 0 {
        return Err(Error::param("empirical_rip needs at least one trial"));
    }
    if r == 0 || r > n {
        return Err(Error::param(format!("rank {r} outside 1..={n}")));
    }
    let ens = MeasurementEnsemble::new(
        n,
        n3,
        m,
        sub_seed(seed, SeedTag::Ensemble),
        mode,
        Materialization::default(),
        DEFAULT_DENSE_BUDGET,
    )?;
    let trial_seed = sub_seed(seed, SeedTag::Trials);
    let tensors = (0..trials)
        .map(|t| random_low_rank(n, n3, r, &mut stream_rng(trial_seed, t as u64)))
        .collect::<Result<Vec<_>>>()?;
    Ok(RipEstimate::from_ratios(r, rip_ratios(&ens, &tensors)?))
}

/// Sample variance of `m` draws of one measurement entry, scaled by `m`
/// (should be close to 1).
pub fn scaled_entry_variance(ens: &MeasurementEnsemble, entry: usize) -> Result<f64> {
    let mut sum = 0.0;
    let mut sum2 = 0.0;
    for i in 0..ens.m() {
        let v = ens.tensor(i)?.data()[entry];
        sum += v;
        sum2 += v * v;
    }
    let m = ens.m() as f64;
    let mean = sum / m;
    Ok((sum2 / m - mean * mean) * m)
}
