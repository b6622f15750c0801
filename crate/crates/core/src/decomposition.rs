//! Spectral-domain factorizations: t-SVD, T-eigendecomposition, tubal-rank,
//! PSD factorization and rank-r PSD projection, condition numbers.
//!
//! Every factorization runs slice by slice on the DFT of the input. Only the
//! independent slices `0..=n3/2` are factorized; the remaining ones are the
//! complex conjugates of their partners, which keeps every factor real after
//! the inverse transform. Self-conjugate slices are real matrices and are
//! factorized in real arithmetic.

use faer::{Mat, MatRef, Side};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::t_algebra::{
    asymmetry, fft3, ifft3, independent_slices, is_self_conjugate, Dims, SpectralTensor, Tensor3,
};

/// Relative tolerance (against σ₁) for tubal-rank and σ_min detection.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;
/// Relative asymmetry accepted by [`t_eig`] and friends.
pub const DEFAULT_SYM_TOL: f64 = 1e-10;
/// Relative tolerance (against σ₁) on negative T-eigenvalues for T-PSD checks.
pub const DEFAULT_PSD_TOL: f64 = 1e-8;

#[derive(Clone, Debug)]
pub struct TSvdFactors {
    pub u: Tensor3,
    pub s: Tensor3,
    pub v: Tensor3,
    /// Singular values of every spectral slice, nonincreasing.
    pub singular_values: Vec<Vec<f64>>,
}

#[derive(Clone, Debug)]
pub struct TEigFactors {
    pub u: Tensor3,
    pub s: Tensor3,
    /// T-eigenvalues of every spectral slice, nonincreasing.
    pub eigenvalues: Vec<Vec<f64>>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpectrumStats {
    pub sigma1: f64,
    pub sigma_min: f64,
    pub kappa: f64,
    pub rank_tol: f64,
}

fn linalg_err(what: &str, k: usize, e: impl std::fmt::Debug) -> Error {
    Error::Linalg(format!("{what} of spectral slice {k}: {e:?}"))
}

fn complexify(m: MatRef<'_, f64>) -> Mat<Complex64> {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| Complex64::new(m[(i, j)], 0.0))
}

fn conj(m: &Mat<Complex64>) -> Mat<Complex64> {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)].conj())
}

/// Full SVD of one spectral slice: `(U, s, V)` with `s` nonincreasing.
fn slice_svd(
    a: MatRef<'_, Complex64>,
    real: bool,
    k: usize,
) -> Result<(Mat<Complex64>, Vec<f64>, Mat<Complex64>)> {
    if real {
        let re = Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)].re);
        let svd = re.svd().map_err(|e| linalg_err("svd", k, e))?;
        let s = svd.S().column_vector().iter().copied().collect();
        Ok((complexify(svd.U()), s, complexify(svd.V())))
    } else {
        let svd = a.svd().map_err(|e| linalg_err("svd", k, e))?;
        let s = svd.S().column_vector().iter().map(|z| z.re).collect();
        Ok((svd.U().to_owned(), s, svd.V().to_owned()))
    }
}

/// Hermitian eigendecomposition of one spectral slice, eigenvalues
/// nonincreasing, each eigenvector scaled so its largest-magnitude component
/// is real positive.
fn slice_eig(a: MatRef<'_, Complex64>, real: bool, k: usize) -> Result<(Vec<f64>, Mat<Complex64>)> {
    let n = a.nrows();
    let (mut values, mut vectors) = if real {
        let re = Mat::from_fn(n, n, |i, j| 0.5 * (a[(i, j)].re + a[(j, i)].re));
        let evd = re
            .self_adjoint_eigen(Side::Lower)
            .map_err(|e| linalg_err("eigendecomposition", k, e))?;
        (
            evd.S().column_vector().iter().copied().collect::<Vec<_>>(),
            complexify(evd.U()),
        )
    } else {
        let h = Mat::from_fn(n, n, |i, j| 0.5 * (a[(i, j)] + a[(j, i)].conj()));
        let evd = h
            .self_adjoint_eigen(Side::Lower)
            .map_err(|e| linalg_err("eigendecomposition", k, e))?;
        (
            evd.S()
                .column_vector()
                .iter()
                .map(|z| z.re)
                .collect::<Vec<_>>(),
            evd.U().to_owned(),
        )
    };
    values.reverse();
    vectors = Mat::from_fn(n, n, |i, j| vectors[(i, n - 1 - j)]);
    for j in 0..n {
        let mut pivot = Complex64::new(0.0, 0.0);
        for i in 0..n {
            if vectors[(i, j)].norm() > pivot.norm() {
                pivot = vectors[(i, j)];
            }
        }
        if pivot.norm() > 0.0 {
            let phase = pivot.conj() / pivot.norm();
            for i in 0..n {
                vectors[(i, j)] *= phase;
            }
        }
    }
    Ok((values, vectors))
}

fn diag_spectrum(dims: Dims, values: &[Vec<f64>]) -> SpectralTensor {
    let slices = values
        .iter()
        .map(|v| {
            Mat::from_fn(dims.n1, dims.n2, |i, j| {
                if i == j && i < v.len() {
                    Complex64::new(v[i], 0.0)
                } else {
                    Complex64::new(0.0, 0.0)
                }
            })
        })
        .collect();
    SpectralTensor::from_slices(slices).expect("nonempty slice list")
}

/// T-eigendecomposition kept in the spectral domain.
#[derive(Clone, Debug)]
pub(crate) struct SpectralEig {
    pub dims: Dims,
    /// Per slice, nonincreasing.
    pub values: Vec<Vec<f64>>,
    /// Per slice, eigenvectors as columns in the order of `values`.
    pub vectors: Vec<Mat<Complex64>>,
}

impl SpectralEig {
    pub fn of(a: &Tensor3, sym_tol: f64) -> Result<Self> {
        let asym = asymmetry(a)?;
        if asym > sym_tol {
            return Err(Error::NotSymmetric {
                asymmetry: asym,
                tol: sym_tol,
            });
        }
        let dims = a.dims();
        let n3 = dims.n3;
        let spec = fft3(a);
        let mut half_values = Vec::new();
        let mut half_vectors = Vec::new();
        for k in independent_slices(n3) {
            let (v, u) = slice_eig(spec.slice(k), is_self_conjugate(k, n3), k)?;
            half_values.push(v);
            half_vectors.push(u);
        }
        let mut values = Vec::with_capacity(n3);
        let mut vectors = Vec::with_capacity(n3);
        for k in 0..n3 {
            let src = if k <= n3 / 2 { k } else { n3 - k };
            values.push(half_values[src].clone());
            vectors.push(if k == src {
                half_vectors[src].clone()
            } else {
                conj(&half_vectors[src])
            });
        }
        Ok(SpectralEig {
            dims,
            values,
            vectors,
        })
    }

    pub fn max_abs(&self) -> f64 {
        self.values
            .iter()
            .flatten()
            .fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn min_value(&self) -> f64 {
        self.values
            .iter()
            .flatten()
            .fold(f64::INFINITY, |m, &v| m.min(v))
    }

    /// Columns `cols` of the eigenvector tensor.
    pub fn vectors_tensor(&self, cols: std::ops::Range<usize>) -> Result<Tensor3> {
        let slices = self
            .vectors
            .iter()
            .map(|u| u.as_ref().subcols(cols.start, cols.len()).to_owned())
            .collect();
        ifft3(&SpectralTensor::from_slices(slices)?)
    }

    /// `U(:, :r, :) * diag(f(λ))` per slice, transformed back.
    pub fn scaled_vectors(&self, r: usize, f: impl Fn(f64) -> f64) -> Result<Tensor3> {
        let n = self.dims.n1;
        let slices = self
            .vectors
            .iter()
            .zip(&self.values)
            .map(|(u, v)| Mat::from_fn(n, r, |i, j| u[(i, j)] * f(v[j])))
            .collect();
        ifft3(&SpectralTensor::from_slices(slices)?)
    }

    /// Diagonal block of the first `r` eigenvalues as an `r x r x n3` tensor.
    pub fn values_tensor(&self, r: usize) -> Result<Tensor3> {
        let trimmed: Vec<Vec<f64>> = self.values.iter().map(|v| v[..r].to_vec()).collect();
        ifft3(&diag_spectrum(Dims::new(r, r, self.dims.n3), &trimmed))
    }
}

/// t-SVD `A = U * S * V^*`.
pub fn t_svd(a: &Tensor3) -> Result<TSvdFactors> {
    let dims = a.dims();
    let Dims { n1, n2, n3 } = dims;
    let spec = fft3(a);
    let (mut us, mut ss, mut vs) = (Vec::new(), Vec::new(), Vec::new());
    for k in independent_slices(n3) {
        let (u, s, v) = slice_svd(spec.slice(k), is_self_conjugate(k, n3), k)?;
        us.push(u);
        ss.push(s);
        vs.push(v);
    }
    let singular_values: Vec<Vec<f64>> = (0..n3)
        .map(|k| ss[if k <= n3 / 2 { k } else { n3 - k }].clone())
        .collect();
    let u = ifft3(&SpectralTensor::from_half(Dims::new(n1, n1, n3), us))?;
    let v = ifft3(&SpectralTensor::from_half(Dims::new(n2, n2, n3), vs))?;
    let s = ifft3(&diag_spectrum(dims, &singular_values))?;
    Ok(TSvdFactors {
        u,
        s,
        v,
        singular_values,
    })
}

impl TSvdFactors {
    /// `U(:,:r,:) * S(:r,:r,:) * V(:,:r,:)^*`, the tubal-rank-r truncation.
    pub fn truncated(&self, r: usize) -> Result<Tensor3> {
        let Dims { n1, n2, n3 } = self.s.dims();
        if r == 0 || r > n1.min(n2) {
            return Err(Error::param(format!(
                "truncation rank {r} outside 1..={}",
                n1.min(n2)
            )));
        }
        let u = fft3(&self.u.columns(0..r)?);
        let v = fft3(&self.v.columns(0..r)?);
        let s: Vec<Vec<f64>> = self
            .singular_values
            .iter()
            .map(|sv| sv[..r].to_vec())
            .collect();
        let s = diag_spectrum(Dims::new(r, r, n3), &s);
        ifft3(&u.matmul(&s)?.matmul_adjoint(&v)?)
    }
}

/// T-eigendecomposition `A = U * S * U^*` of a symmetric tensor.
pub fn t_eig(a: &Tensor3, sym_tol: f64) -> Result<TEigFactors> {
    let eig = SpectralEig::of(a, sym_tol)?;
    let n = eig.dims.n1;
    let u = eig.vectors_tensor(0..n)?;
    let s = eig.values_tensor(n)?;
    Ok(TEigFactors {
        u,
        s,
        eigenvalues: eig.values,
    })
}

fn slice_singular_values(a: &Tensor3) -> Result<Vec<Vec<f64>>> {
    let n3 = a.dims().n3;
    let spec = fft3(a);
    let mut half = Vec::new();
    for k in independent_slices(n3) {
        let s = spec.slice(k);
        let sv = if is_self_conjugate(k, n3) {
            Mat::from_fn(s.nrows(), s.ncols(), |i, j| s[(i, j)].re).singular_values()
        } else {
            s.singular_values()
        }
        .map_err(|e| linalg_err("singular values", k, e))?;
        half.push(sv);
    }
    Ok((0..n3)
        .map(|k| half[if k <= n3 / 2 { k } else { n3 - k }].clone())
        .collect())
}

/// Number of nonzero singular tubes: the largest count, over spectral slices,
/// of singular values above `tol * σ₁`.
pub fn tubal_rank(a: &Tensor3, tol: f64) -> Result<usize> {
    let sv = slice_singular_values(a)?;
    let sigma1 = sv.iter().flatten().fold(0.0f64, |m, &s| m.max(s));
    if sigma1 == 0.0 {
        return Ok(0);
    }
    Ok(sv
        .iter()
        .map(|s| s.iter().filter(|&&x| x > tol * sigma1).count())
        .max()
        .unwrap_or(0))
}

/// Factor `F` (`n x r x n3`) with `F * F^* = X` for a T-PSD `X` of tubal-rank at most `r`.
pub fn psd_factor(x: &Tensor3, r: usize) -> Result<Tensor3> {
    psd_factor_with_tol(x, r, DEFAULT_PSD_TOL)
}

pub fn psd_factor_with_tol(x: &Tensor3, r: usize, tol: f64) -> Result<Tensor3> {
    let n = x.dims().n1;
    if r == 0 || r > n {
        return Err(Error::param(format!("factor rank {r} outside 1..={n}")));
    }
    let eig = SpectralEig::of(x, DEFAULT_SYM_TOL)?;
    let sigma1 = eig.max_abs();
    let lowest = eig.min_value();
    if lowest < -tol * sigma1 {
        return Err(Error::NotPsd {
            eigenvalue: lowest,
            tol,
        });
    }
    let f = eig.scaled_vectors(r, |l| l.max(0.0).sqrt())?;
    let norm = x.fro_norm();
    let residual =
        crate::t_algebra::gram_product(&f)?.sub(x)?.fro_norm() / norm.max(f64::MIN_POSITIVE);
    if norm > 0.0 && residual > 1e-8 {
        return Err(Error::RankTooSmall { r, residual });
    }
    Ok(f)
}

/// Best rank-r T-PSD factor of a symmetric tensor: negative T-eigenvalues are
/// clamped to zero and the top `r` eigenpairs of every slice are kept.
pub fn project_psd_rank_r(a: &Tensor3, r: usize) -> Result<Tensor3> {
    let n = a.dims().n1;
    if !a.is_square() {
        return Err(Error::shape(format!(
            "PSD projection of non-square tensor {}",
            a.dims()
        )));
    }
    if r == 0 || r > n {
        return Err(Error::param(format!("projection rank {r} outside 1..={n}")));
    }
    SpectralEig::of(a, DEFAULT_SYM_TOL)?.scaled_vectors(r, |l| l.max(0.0).sqrt())
}

/// σ₁, σ_min and κ of the block-diagonal spectrum. σ_min is the smallest
/// singular value above `tol * σ₁` among the leading `r_star` of each slice.
pub fn condition_number(x: &Tensor3, r_star: usize, tol: f64) -> Result<SpectrumStats> {
    if r_star == 0 {
        return Err(Error::param("r_star must be at least 1"));
    }
    let sv = slice_singular_values(x)?;
    let sigma1 = sv.iter().flatten().fold(0.0f64, |m, &s| m.max(s));
    if sigma1 == 0.0 {
        return Err(Error::ZeroTensor);
    }
    let sigma_min = sv
        .iter()
        .flat_map(|s| s.iter().take(r_star))
        .filter(|&&s| s > tol * sigma1)
        .fold(f64::INFINITY, |m, &s| m.min(s));
    Ok(SpectrumStats {
        sigma1,
        sigma_min,
        kappa: sigma1 / sigma_min,
        rank_tol: tol,
    })
}

/// Whether every T-eigenvalue is at least `-tol * σ₁`.
pub fn is_tpsd(x: &Tensor3, tol: f64) -> Result<bool> {
    let eig = SpectralEig::of(x, DEFAULT_SYM_TOL)?;
    Ok(eig.min_value() >= -tol * eig.max_abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::t_algebra::{conj_transpose, gram_product, identity_tensor, t_product};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn rel(a: &Tensor3, b: &Tensor3) -> f64 {
        a.sub(b).unwrap().fro_norm() / b.fro_norm().max(1.0)
    }

    #[test]
    fn svd_of_identity() {
        let i = identity_tensor(3, 2);
        let f = t_svd(&i).unwrap();
        assert!(rel(&f.s, &i) < 1e-12);
        let rec = t_product(&t_product(&f.u, &f.s).unwrap(), &conj_transpose(&f.v)).unwrap();
        assert!(rel(&rec, &i) < 1e-12);
    }

    #[test]
    fn svd_random_reconstruction() {
        let a = Tensor3::random_normal((5, 4, 3), 1.0, &mut rng(1));
        let f = t_svd(&a).unwrap();
        assert_eq!(f.u.shape(), (5, 5, 3));
        assert_eq!(f.v.shape(), (4, 4, 3));
        let rec = t_product(&t_product(&f.u, &f.s).unwrap(), &conj_transpose(&f.v)).unwrap();
        assert!(rel(&rec, &a) < 1e-10);
        for sv in &f.singular_values {
            assert!(sv.windows(2).all(|w| w[0] >= w[1]) && sv.iter().all(|&s| s >= 0.0));
        }
    }

    #[test]
    fn single_slice_svd_matches_matrix_svd() {
        let a = Tensor3::random_normal((4, 3, 1), 1.0, &mut rng(2));
        let m = Mat::from_fn(4, 3, |i, j| a.get(i, j, 0));
        let oracle = m.singular_values().unwrap();
        let f = t_svd(&a).unwrap();
        for (x, y) in f.singular_values[0].iter().zip(&oracle) {
            assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn eig_of_identity_and_psd() {
        let f = t_eig(&identity_tensor(4, 3), DEFAULT_SYM_TOL).unwrap();
        assert!(f
            .eigenvalues
            .iter()
            .flatten()
            .all(|&l| (l - 1.0).abs() < 1e-12));

        let g = Tensor3::random_normal((6, 2, 4), 1.0, &mut rng(3));
        let x = gram_product(&g).unwrap();
        let e = t_eig(&x, DEFAULT_SYM_TOL).unwrap();
        let sigma1 = e
            .eigenvalues
            .iter()
            .flatten()
            .fold(0.0f64, |m, &v| m.max(v));
        assert!(e
            .eigenvalues
            .iter()
            .flatten()
            .all(|&l| l >= -1e-10 * sigma1));
        let rec = t_product(&t_product(&e.u, &e.s).unwrap(), &conj_transpose(&e.u)).unwrap();
        assert!(rel(&rec, &x) < 1e-10);
    }

    #[test]
    fn eig_rejects_asymmetric() {
        let a = Tensor3::random_normal((3, 3, 2), 1.0, &mut rng(4));
        assert!(matches!(
            t_eig(&a, DEFAULT_SYM_TOL),
            Err(Error::NotSymmetric { .. })
        ));
    }

    #[test]
    fn tubal_rank_examples() {
        assert_eq!(
            tubal_rank(&Tensor3::zeros(3, 3, 2), DEFAULT_RANK_TOL).unwrap(),
            0
        );
        assert_eq!(
            tubal_rank(&identity_tensor(5, 3), DEFAULT_RANK_TOL).unwrap(),
            5
        );
        let f = Tensor3::random_normal((10, 3, 4), 1.0, &mut rng(5));
        assert_eq!(
            tubal_rank(&gram_product(&f).unwrap(), DEFAULT_RANK_TOL).unwrap(),
            3
        );
    }

    #[test]
    fn psd_factor_round_trip_and_errors() {
        let f0 = Tensor3::random_normal((8, 2, 3), 1.0, &mut rng(6));
        let x = gram_product(&f0).unwrap();
        let f = psd_factor(&x, 2).unwrap();
        assert!(gram_product(&f).unwrap().sub(&x).unwrap().fro_norm() <= 1e-8 * x.fro_norm());
        assert!(matches!(psd_factor(&x, 1), Err(Error::RankTooSmall { .. })));

        let i = identity_tensor(3, 2);
        let f = psd_factor(&i, 3).unwrap();
        assert!(rel(&gram_product(&f).unwrap(), &i) < 1e-12);

        // T-eigenvalues (1, -0.1) on a single slice
        let neg = Tensor3::new((2, 2, 1), vec![1.0, 0.0, 0.0, -0.1]).unwrap();
        assert!(matches!(psd_factor(&neg, 2), Err(Error::NotPsd { .. })));
    }

    #[test]
    fn projection_clamps_and_truncates() {
        let a = Tensor3::new(
            (3, 3, 1),
            vec![3.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, -2.0],
        )
        .unwrap();
        let x = gram_product(&project_psd_rank_r(&a, 2).unwrap()).unwrap();
        let expected = [3.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0];
        for (v, e) in x.data().iter().zip(expected) {
            assert!((v - e).abs() < 1e-12);
        }

        let neg = identity_tensor(4, 3).scale(-1.0);
        assert!(project_psd_rank_r(&neg, 2).unwrap().fro_norm() == 0.0);
    }

    #[test]
    fn condition_number_examples() {
        let s = condition_number(&identity_tensor(4, 3), 4, DEFAULT_RANK_TOL).unwrap();
        assert!((s.kappa - 1.0).abs() < 1e-12);
        let d = Tensor3::new((2, 2, 1), vec![4.0, 0.0, 0.0, 2.0]).unwrap();
        assert!((condition_number(&d, 2, DEFAULT_RANK_TOL).unwrap().kappa - 2.0).abs() < 1e-12);
        assert!(matches!(
            condition_number(&Tensor3::zeros(2, 2, 2), 1, DEFAULT_RANK_TOL),
            Err(Error::ZeroTensor)
        ));
    }

    #[test]
    fn tpsd_examples() {
        let f = Tensor3::random_normal((5, 2, 3), 1.0, &mut rng(7));
        assert!(is_tpsd(&gram_product(&f).unwrap(), DEFAULT_PSD_TOL).unwrap());
        assert!(!is_tpsd(&identity_tensor(3, 3).scale(-1.0), DEFAULT_PSD_TOL).unwrap());
    }

    #[test]
    fn eigenvectors_are_phase_normalized() {
        let f = Tensor3::random_normal((5, 3, 4), 1.0, &mut rng(8));
        let eig = SpectralEig::of(&gram_product(&f).unwrap(), DEFAULT_SYM_TOL).unwrap();
        for u in &eig.vectors {
            for j in 0..u.ncols() {
                let pivot =
                    (0..u.nrows())
                        .map(|i| u[(i, j)])
                        .fold(Complex64::new(0.0, 0.0), |p, z| {
                            if z.norm() > p.norm() {
                                z
                            } else {
                                p
                            }
                        });
                assert!(pivot.im.abs() < 1e-12 && pivot.re > 0.0);
            }
        }
    }
}
