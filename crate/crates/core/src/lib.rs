//! Low-tubal-rank tensor recovery under the t-SVD framework by factorized
//! gradient descent (tensor Burer–Monteiro).
//!
//! The crate is organised bottom-up:
//!
//! - [`t_algebra`]: dense third-order tensors, the FFT-based t-product, and
//!   block-circulant oracles.
//! - [`decomposition`]: t-SVD, T-eigendecomposition, tubal-rank, PSD
//!   factorization and projection, condition numbers.
//! - [`sensing`]: seeded Gaussian measurement ensembles, the forward map and
//!   its adjoint, synthetic problem generation, empirical T-RIP.
//! - [`solver`]: spectral initialization plus factorized gradient descent.
//! - [`diagnostics`]: population/sample error decomposition and rate fitting.
//! - [`experiments`]: reproducible experiment drivers behind the CLI.

pub mod decomposition;
pub mod diagnostics;
pub mod error;
pub mod experiments;
pub mod sensing;
pub mod solver;
pub mod t_algebra;

pub use error::{Error, Result};
pub use t_algebra::{Dims, SpectralTensor, Tensor3};

pub use faer;
