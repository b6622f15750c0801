//! Gaussian measurement ensembles, the forward map and its adjoint, synthetic
//! problem generation and empirical T-RIP estimation.

mod ensemble;
mod gram;
mod problem;
mod rip;
mod seeds;

pub use ensemble::{
    make_ensemble, Materialization, MeasurementEnsemble, MeasurementMode, DEFAULT_CHUNK,
    DEFAULT_DENSE_BUDGET,
};
pub use gram::{gram_bytes, GramOperator, SymCoords};
pub use problem::{gen_problem, ProblemInstance, ProblemParams};
pub use rip::{
    empirical_rip, empirical_rip_with_mode, random_low_rank, rip_ratios, scaled_entry_variance,
    RipEstimate,
};
pub use seeds::{splitmix64, stream_rng, sub_seed, SeedTag};
