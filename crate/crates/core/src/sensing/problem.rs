use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::ensemble::{
    Materialization, MeasurementEnsemble, MeasurementMode, DEFAULT_DENSE_BUDGET,
};
use super::gram::GramOperator;
use super::seeds::{sub_seed, SeedTag};
use crate::decomposition::{condition_number, SpectrumStats, DEFAULT_RANK_TOL};
use crate::error::{Error, Result};
use crate::t_algebra::{gram_product, sym, Tensor3};

/// Everything needed to generate a synthetic recovery problem.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProblemParams {
    pub n: usize,
    pub n3: usize,
    pub r_star: usize,
    pub m: usize,
    /// Noise standard deviation `v`.
    pub v: f64,
    pub seed: u64,
    pub mode: MeasurementMode,
    pub materialization: Materialization,
}

impl ProblemParams {
    pub fn new(n: usize, n3: usize, r_star: usize, m: usize, v: f64, seed: u64) -> Self {
        ProblemParams {
            n,
            n3,
            r_star,
            m,
            v,
            seed,
            mode: MeasurementMode::default(),
            materialization: Materialization::default(),
        }
    }

    pub fn with_mode(mut self, mode: MeasurementMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_materialization(mut self, materialization: Materialization) -> Self {
        self.materialization = materialization;
        self
    }

    pub fn generate(&self) -> Result<ProblemInstance> {
        self.generate_inner(None)
    }

    /// As [`generate`](Self::generate), also building the [`GramOperator`]
    /// in the same pass over the ensemble that produces `y`.
    pub fn generate_with_gram(&self, budget: usize) -> Result<ProblemInstance> {
        self.generate_inner(Some(budget))
    }

    fn generate_inner(&self, gram_budget: Option<usize>) -> Result<ProblemInstance> {
        let ProblemParams {
            n,
            n3,
            r_star,
            m,
            v,
            seed,
            ..
        } = *self;
        if r_star == 0 || r_star > n {
            return Err(Error::param(format!("r_star = {r_star} outside 1..={n}")));
        }
        if !(v >= 0.0 && v.is_finite()) {
            return Err(Error::param(format!(
                "noise level v = {v} must be finite and nonnegative"
            )));
        }
        let ensemble = MeasurementEnsemble::new(
            n,
            n3,
            m,
            sub_seed(seed, SeedTag::Ensemble),
            self.mode,
            self.materialization,
            DEFAULT_DENSE_BUDGET,
        )?;
        let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(seed, SeedTag::GroundTruth));
        let f_star = Tensor3::random_normal((n, r_star, n3), 1.0, &mut rng);
        let x_star = sym(&gram_product(&f_star)?)?;
        let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(seed, SeedTag::Noise));
        let noise: Vec<f64> = (0..m)
            .map(|_| v * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let (y, gram) = match gram_budget {
            Some(budget) => {
                let (op, y) =
                    GramOperator::build_with_observations(&ensemble, &x_star, &noise, budget)?;
                (y, Some(Arc::new(op)))
            }
            None => {
                let clean = ensemble.measure(&x_star)?;
                (clean.iter().zip(&noise).map(|(a, s)| a + s).collect(), None)
            }
        };
        let spectrum = condition_number(&x_star, r_star, DEFAULT_RANK_TOL)?;
        Ok(ProblemInstance {
            params: *self,
            x_star,
            f_star,
            y,
            noise,
            ensemble,
            spectrum,
            gram,
        })
    }
}

/// Synthetic instance `y = M(X_star) + s` with `X_star = F_star * F_star^*`.
#[derive(Clone, Debug)]
pub struct ProblemInstance {
    pub params: ProblemParams,
    pub x_star: Tensor3,
    pub f_star: Tensor3,
    pub y: Vec<f64>,
    /// The noise draw `s`.
    pub noise: Vec<f64>,
    pub ensemble: MeasurementEnsemble,
    pub spectrum: SpectrumStats,
    /// Normal-equation operator for `y`, when built up front.
    pub gram: Option<Arc<GramOperator>>,
}

impl ProblemInstance {
    /// An instance over an existing ensemble, e.g. to share one ensemble
    /// across noise levels.
    pub fn from_parts(
        ensemble: MeasurementEnsemble,
        f_star: Tensor3,
        noise: Vec<f64>,
        v: f64,
    ) -> Result<Self> {
        let dims = ensemble.dims();
        let r_star = f_star.dims().n2;
        if f_star.dims().n1 != dims.n1 || f_star.dims().n3 != dims.n3 {
            return Err(Error::shape(format!(
                "factor {} does not fit ensemble {}",
                f_star.dims(),
                dims
            )));
        }
        if noise.len() != ensemble.m() {
            return Err(Error::shape(format!(
                "{} noise values for {} measurements",
                noise.len(),
                ensemble.m()
            )));
        }
        let x_star = sym(&gram_product(&f_star)?)?;
        let y = ensemble
            .measure(&x_star)?
            .iter()
            .zip(&noise)
            .map(|(a, s)| a + s)
            .collect();
        let spectrum = condition_number(&x_star, r_star, DEFAULT_RANK_TOL)?;
        let params = ProblemParams {
            n: dims.n1,
            n3: dims.n3,
            r_star,
            m: ensemble.m(),
            v,
            seed: ensemble.seed(),
            mode: ensemble.mode(),
            materialization: ensemble.materialization(),
        };
        Ok(ProblemInstance {
            params,
            x_star,
            f_star,
            y,
            noise,
            ensemble,
            spectrum,
            gram: None,
        })
    }

    pub fn r_star(&self) -> usize {
        self.params.r_star
    }

    pub fn n(&self) -> usize {
        self.params.n
    }

    pub fn n3(&self) -> usize {
        self.params.n3
    }
}

/// Generates an instance with plain Gaussian, streamed measurements.
pub fn gen_problem(
    n: usize,
    n3: usize,
    r_star: usize,
    m: usize,
    v: f64,
    seed: u64,
) -> Result<ProblemInstance> {
    ProblemParams::new(n, n3, r_star, m, v, seed).generate()
}
