//! Third-order tensors and the t-product algebra.
//!
//! All products run through the spectral domain (FFT along the third mode);
//! the block-circulant and unfold/fold constructions are kept as small test
//! oracles.

mod ops;
mod spectral;
mod tensor;

pub use ops::{
    asymmetry, bcirc_matrix, conj_transpose, fold, fro_norm, gram_product, identity_tensor, inner,
    spectral_norm, sym, t_product, unfold, BCIRC_MAX_DIM,
};
pub use spectral::{
    conjugate_partner, fft3, ifft3, independent_slices, is_self_conjugate, SpectralTensor,
    IMAG_RESIDUE_TOL,
};
pub(crate) use tensor::dot;
pub use tensor::{Dims, Tensor3};
