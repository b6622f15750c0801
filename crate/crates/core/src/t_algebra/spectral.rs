//! Frequency-domain representation of a tensor: the DFT of every tube
//! `A(i, j, :)`, held as `n3` complex frontal slices.
//!
//! The forward transform is unnormalized and the inverse is scaled by `1/n3`,
//! so `sum_k ||A_hat^(k)||_F^2 = n3 * ||A||_F^2`. Under this convention the
//! t-product becomes a slice-wise matrix product and the tensor spectral norm
//! is the largest slice spectral norm.

use std::sync::Arc;

use faer::linalg::matmul::matmul;
use faer::{Accum, Mat, MatRef, Par};
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::tensor::{Dims, Tensor3};
use crate::error::{Error, Result};

/// Relative threshold on the imaginary residue left by [`ifft3`].
pub const IMAG_RESIDUE_TOL: f64 = 1e-8;

#[derive(Clone, Debug)]
pub struct SpectralTensor {
    dims: Dims,
    slices: Vec<Mat<Complex64>>,
}

/// Index of the slice holding the conjugate of slice `k` for a real tensor.
#[inline]
pub fn conjugate_partner(k: usize, n3: usize) -> usize {
    (n3 - k) % n3
}

/// Slices `0..=n3/2` determine the spectrum of a real tensor; the rest are
/// conjugates of these.
#[inline]
pub fn independent_slices(n3: usize) -> std::ops::RangeInclusive<usize> {
    0..=n3 / 2
}

/// Slice `k` of a real tensor's spectrum is itself real.
#[inline]
pub fn is_self_conjugate(k: usize, n3: usize) -> bool {
    conjugate_partner(k, n3) == k
}

fn plan(n3: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    let mut planner = FftPlanner::new();
    if inverse {
        planner.plan_fft_inverse(n3)
    } else {
        planner.plan_fft_forward(n3)
    }
}

/// Forward DFT of every tube.
pub fn fft3(a: &Tensor3) -> SpectralTensor {
    let dims = a.dims();
    let Dims { n1, n2, n3 } = dims;
    let tubes = n1 * n2;
    let mut buf = vec![Complex64::new(0.0, 0.0); dims.len()];
    let src = a.data();
    for k in 0..n3 {
        let slice = &src[k * tubes..(k + 1) * tubes];
        for (t, &v) in slice.iter().enumerate() {
            buf[t * n3 + k] = Complex64::new(v, 0.0);
        }
    }
    if n3 > 1 {
        plan(n3, false).process(&mut buf);
    }
    let slices = (0..n3)
        .map(|k| Mat::from_fn(n1, n2, |i, j| buf[(i * n2 + j) * n3 + k]))
        .collect();
    SpectralTensor { dims, slices }
}

/// Inverse DFT of every tube, scaled by `1/n3`.
///
/// Fails with [`Error::NonRealResult`] if any output entry carries an
/// imaginary part above `1e-8 * (1 + ||S||_F)`.
pub fn ifft3(s: &SpectralTensor) -> Result<Tensor3> {
    let dims = s.dims;
    let Dims { n1, n2, n3 } = dims;
    let tubes = n1 * n2;
    let mut buf = vec![Complex64::new(0.0, 0.0); dims.len()];
    for (k, slice) in s.slices.iter().enumerate() {
        for i in 0..n1 {
            for j in 0..n2 {
                buf[(i * n2 + j) * n3 + k] = slice[(i, j)];
            }
        }
    }
    if n3 > 1 {
        plan(n3, true).process(&mut buf);
    }
    let scale = 1.0 / n3 as f64;
    let threshold = IMAG_RESIDUE_TOL * (1.0 + s.fro_norm());
    let mut residue = 0.0f64;
    let mut out = vec![0.0; dims.len()];
    for t in 0..tubes {
        for k in 0..n3 {
            let z = buf[t * n3 + k] * scale;
            residue = residue.max(z.im.abs());
            out[k * tubes + t] = z.re;
        }
    }
    if residue > threshold || !residue.is_finite() {
        return Err(Error::NonRealResult { residue, threshold });
    }
    if let Some(idx) = out.iter().position(|x| !x.is_finite()) {
        return Err(Error::NonFinite(idx));
    }
    Ok(Tensor3::from_raw(dims, out))
}

impl SpectralTensor {
    pub fn from_slices(slices: Vec<Mat<Complex64>>) -> Result<Self> {
        let first = slices
            .first()
            .ok_or_else(|| Error::param("a spectral tensor needs at least one slice"))?;
        let (n1, n2) = (first.nrows(), first.ncols());
        if slices.iter().any(|s| s.nrows() != n1 || s.ncols() != n2) {
            return Err(Error::shape("spectral slices must share one shape"));
        }
        let dims = Dims::new(n1, n2, slices.len());
        dims.validate()?;
        Ok(SpectralTensor { dims, slices })
    }

    pub fn zeros(dims: Dims) -> Self {
        let slices = (0..dims.n3).map(|_| Mat::zeros(dims.n1, dims.n2)).collect();
        SpectralTensor { dims, slices }
    }

    /// Builds the spectrum from its independent slices `0..=n3/2` by
    /// conjugate mirroring, which guarantees a real inverse transform.
    pub(crate) fn from_half(dims: Dims, half: Vec<Mat<Complex64>>) -> Self {
        let n3 = dims.n3;
        debug_assert_eq!(half.len(), n3 / 2 + 1);
        let mut slices: Vec<Mat<Complex64>> = Vec::with_capacity(n3);
        for k in 0..n3 {
            if k <= n3 / 2 {
                slices.push(half[k].clone());
            } else {
                let src = &half[conjugate_partner(k, n3)];
                slices.push(Mat::from_fn(src.nrows(), src.ncols(), |i, j| {
                    src[(i, j)].conj()
                }));
            }
        }
        SpectralTensor { dims, slices }
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn n3(&self) -> usize {
        self.dims.n3
    }

    pub fn slice(&self, k: usize) -> MatRef<'_, Complex64> {
        self.slices[k].as_ref()
    }

    pub fn slices(&self) -> &[Mat<Complex64>] {
        &self.slices
    }

    pub fn fro_norm(&self) -> f64 {
        self.slices
            .iter()
            .map(|s| s.squared_norm_l2())
            .sum::<f64>()
            .sqrt()
    }

    /// Slice-wise product `self^(k) * other^(k)`.
    pub fn matmul(&self, other: &SpectralTensor) -> Result<SpectralTensor> {
        self.product(other, false)
    }

    /// Slice-wise product `self^(k) * (other^(k))^H`.
    pub fn matmul_adjoint(&self, other: &SpectralTensor) -> Result<SpectralTensor> {
        self.product(other, true)
    }

    fn product(&self, other: &SpectralTensor, adjoint_rhs: bool) -> Result<SpectralTensor> {
        let inner_rhs = if adjoint_rhs {
            other.dims.n2
        } else {
            other.dims.n1
        };
        if self.dims.n2 != inner_rhs || self.dims.n3 != other.dims.n3 {
            return Err(Error::shape(format!(
                "spectral product {} * {}{}",
                self.dims,
                other.dims,
                if adjoint_rhs { "^H" } else { "" }
            )));
        }
        let cols = if adjoint_rhs {
            other.dims.n1
        } else {
            other.dims.n2
        };
        let slices = self
            .slices
            .iter()
            .zip(&other.slices)
            .map(|(a, b)| {
                let mut c = Mat::zeros(a.nrows(), cols);
                if adjoint_rhs {
                    matmul(
                        c.as_mut(),
                        Accum::Replace,
                        a.as_ref(),
                        b.adjoint(),
                        Complex64::new(1.0, 0.0),
                        Par::Seq,
                    );
                } else {
                    matmul(
                        c.as_mut(),
                        Accum::Replace,
                        a.as_ref(),
                        b.as_ref(),
                        Complex64::new(1.0, 0.0),
                        Par::Seq,
                    );
                }
                c
            })
            .collect();
        Ok(SpectralTensor {
            dims: Dims::new(self.dims.n1, cols, self.dims.n3),
            slices,
        })
    }

    /// Slice-wise conjugate transpose; the spectrum of [`super::conj_transpose`].
    pub fn adjoint(&self) -> SpectralTensor {
        let slices = self.slices.iter().map(|s| s.adjoint().to_owned()).collect();
        SpectralTensor {
            dims: self.dims.transposed(),
            slices,
        }
    }

    pub fn sub(&self, other: &SpectralTensor) -> Result<SpectralTensor> {
        if self.dims != other.dims {
            return Err(Error::shape(format!(
                "spectral sub {} vs {}",
                self.dims, other.dims
            )));
        }
        let slices = self
            .slices
            .iter()
            .zip(&other.slices)
            .map(|(a, b)| a - b)
            .collect();
        Ok(SpectralTensor {
            dims: self.dims,
            slices,
        })
    }

    /// Largest singular value over all slices.
    pub fn spectral_norm(&self) -> Result<f64> {
        let mut best = 0.0f64;
        for (k, slice) in self.slices.iter().enumerate() {
            let sv = slice
                .singular_values()
                .map_err(|e| Error::Linalg(format!("singular values of slice {k}: {e:?}")))?;
            best = best.max(sv.first().copied().unwrap_or(0.0));
        }
        Ok(best)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn length_one_transform_is_identity() {
        let a = Tensor3::new((2, 2, 1), vec![1.0, -2.0, 3.5, 4.0]).unwrap();
        let s = fft3(&a);
        for i in 0..2 {
            for j in 0..2 {
                assert_eq!(s.slice(0)[(i, j)], Complex64::new(a.get(i, j, 0), 0.0));
            }
        }
    }

    #[test]
    fn two_point_transform() {
        let a = Tensor3::new((1, 1, 2), vec![1.0, 2.0]).unwrap();
        let s = fft3(&a);
        assert!((s.slice(0)[(0, 0)] - Complex64::new(3.0, 0.0)).norm() < 1e-15);
        assert!((s.slice(1)[(0, 0)] - Complex64::new(-1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn inconsistent_spectrum_is_not_real() {
        let s = SpectralTensor::from_slices(vec![
            Mat::from_fn(1, 1, |_, _| Complex64::new(1.0, 0.0)),
            Mat::from_fn(1, 1, |_, _| Complex64::new(0.0, 2.0)),
        ])
        .unwrap();
        assert!(matches!(ifft3(&s), Err(Error::NonRealResult { .. })));
    }

    #[test]
    fn zero_spectrum_gives_zero_tensor() {
        let s = SpectralTensor::zeros(Dims::new(2, 3, 4));
        let t = ifft3(&s).unwrap();
        assert!(t.data().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn mirrored_half_spectrum_is_real() {
        let dims = Dims::new(2, 2, 5);
        let half: Vec<_> = (0..3)
            .map(|k| {
                Mat::from_fn(2, 2, |i, j| {
                    if k == 0 {
                        Complex64::new((i + j) as f64, 0.0)
                    } else {
                        Complex64::new(i as f64 - 0.5, j as f64 + k as f64)
                    }
                })
            })
            .collect();
        let s = SpectralTensor::from_half(dims, half);
        assert!(ifft3(&s).is_ok());
    }
}
