use faer::Mat;

use super::spectral::{fft3, ifft3};
use super::tensor::{Dims, Tensor3};
use crate::error::{Error, Result};

/// Size cap for the dense block-circulant oracle (rows and columns).
pub const BCIRC_MAX_DIM: usize = 512;

/// `A * B` computed slice-wise in the spectral domain.
pub fn t_product(a: &Tensor3, b: &Tensor3) -> Result<Tensor3> {
    let (da, db) = (a.dims(), b.dims());
    if da.n2 != db.n1 || da.n3 != db.n3 {
        return Err(Error::shape(format!("t-product {da} * {db}")));
    }
    ifft3(&fft3(a).matmul(&fft3(b))?)
}

/// `A * A^*`, the symmetric T-PSD product used throughout the solver.
pub fn gram_product(a: &Tensor3) -> Result<Tensor3> {
    let s = fft3(a);
    ifft3(&s.matmul_adjoint(&s)?)
}

/// Transposes every frontal slice and reverses the order of slices `2..n3`.
pub fn conj_transpose(a: &Tensor3) -> Tensor3 {
    let Dims { n1, n2, n3 } = a.dims();
    Tensor3::from_fn(n2, n1, n3, |i, j, k| a.get(j, i, (n3 - k) % n3))
}

/// `(A + A^*) / 2` for a square tensor.
pub fn sym(a: &Tensor3) -> Result<Tensor3> {
    if !a.is_square() {
        return Err(Error::shape(format!(
            "sym of non-square tensor {}",
            a.dims()
        )));
    }
    let at = conj_transpose(a);
    Ok(Tensor3::from_raw(
        a.dims(),
        a.data()
            .iter()
            .zip(at.data())
            .map(|(x, y)| 0.5 * (x + y))
            .collect(),
    ))
}

/// Relative asymmetry `||A - A^*||_F / ||A||_F` (zero for the zero tensor).
pub fn asymmetry(a: &Tensor3) -> Result<f64> {
    if !a.is_square() {
        return Err(Error::shape(format!(
            "asymmetry of non-square tensor {}",
            a.dims()
        )));
    }
    let norm = a.fro_norm();
    if norm == 0.0 {
        return Ok(0.0);
    }
    Ok(a.sub(&conj_transpose(a))?.fro_norm() / norm)
}

/// Identity tensor: first frontal slice `I_n`, all others zero.
pub fn identity_tensor(n: usize, n3: usize) -> Tensor3 {
    Tensor3::from_fn(n, n, n3, |i, j, k| if k == 0 && i == j { 1.0 } else { 0.0 })
}

/// Tensor spectral norm: the largest singular value of any spectral slice.
pub fn spectral_norm(a: &Tensor3) -> Result<f64> {
    fft3(a).spectral_norm()
}

pub fn fro_norm(a: &Tensor3) -> f64 {
    a.fro_norm()
}

pub fn inner(a: &Tensor3, b: &Tensor3) -> Result<f64> {
    a.inner(b)
}

/// Dense block-circulant matrix of `A`; block `(p, q)` is slice `(p - q) mod n3`.
/// Test oracle only, capped at [`BCIRC_MAX_DIM`].
pub fn bcirc_matrix(a: &Tensor3) -> Result<Mat<f64>> {
    let Dims { n1, n2, n3 } = a.dims();
    let (rows, cols) = (n1 * n3, n2 * n3);
    if rows > BCIRC_MAX_DIM || cols > BCIRC_MAX_DIM {
        return Err(Error::OracleTooLarge {
            rows,
            cols,
            cap: BCIRC_MAX_DIM,
        });
    }
    Ok(Mat::from_fn(rows, cols, |r, c| {
        let (p, i) = (r / n1, r % n1);
        let (q, j) = (c / n2, c % n2);
        a.get(i, j, (p + n3 - q) % n3)
    }))
}

/// Stacks the frontal slices vertically: an `(n1 n3) x n2` matrix.
pub fn unfold(a: &Tensor3) -> Mat<f64> {
    let Dims { n1, n2, n3 } = a.dims();
    Mat::from_fn(n1 * n3, n2, |r, j| a.get(r % n1, j, r / n1))
}

/// Inverse of [`unfold`].
pub fn fold(m: &Mat<f64>, n3: usize) -> Result<Tensor3> {
    if n3 == 0 || !m.nrows().is_multiple_of(n3) {
        return Err(Error::shape(format!(
            "cannot fold {} rows into {n3} slices",
            m.nrows()
        )));
    }
    let n1 = m.nrows() / n3;
    Tensor3::new((n1, m.ncols(), n3), {
        let mut data = Vec::with_capacity(m.nrows() * m.ncols());
        for k in 0..n3 {
            for i in 0..n1 {
                for j in 0..m.ncols() {
                    data.push(m[(k * n1 + i, j)]);
                }
            }
        }
        data
    })
}

impl Tensor3 {
    pub fn t_product(&self, other: &Tensor3) -> Result<Tensor3> {
        t_product(self, other)
    }

    pub fn conj_transpose(&self) -> Tensor3 {
        conj_transpose(self)
    }

    pub fn spectral_norm(&self) -> Result<f64> {
        spectral_norm(self)
    }
}
