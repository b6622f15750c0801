use std::fmt;
use std::ops::Range;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Shape of a third-order tensor: `n1` rows, `n2` columns, `n3` frontal slices.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Dims {
    pub n1: usize,
    pub n2: usize,
    pub n3: usize,
}

impl Dims {
    pub const fn new(n1: usize, n2: usize, n3: usize) -> Self {
        Dims { n1, n2, n3 }
    }

    /// Entries per frontal slice.
    pub const fn slice_len(&self) -> usize {
        self.n1 * self.n2
    }

    pub const fn len(&self) -> usize {
        self.n1 * self.n2 * self.n3
    }

    pub const fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Offset of entry `(i, j, k)` in the slice-major, row-major-within-slice layout.
    #[inline]
    pub const fn offset(&self, i: usize, j: usize, k: usize) -> usize {
        k * self.n1 * self.n2 + i * self.n2 + j
    }

    pub const fn transposed(&self) -> Dims {
        Dims::new(self.n2, self.n1, self.n3)
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if self.n1 == 0 || self.n2 == 0 || self.n3 == 0 {
            return Err(Error::param(format!(
                "tensor dimensions must be positive, got {self}"
            )));
        }
        self.n1
            .checked_mul(self.n2)
            .and_then(|s| s.checked_mul(self.n3))
            .ok_or(Error::ShapeOverflow(*self))?;
        Ok(())
    }
}

impl fmt::Display for Dims {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}x{}", self.n1, self.n2, self.n3)
    }
}

impl From<(usize, usize, usize)> for Dims {
    fn from((n1, n2, n3): (usize, usize, usize)) -> Self {
        Dims::new(n1, n2, n3)
    }
}

/// Dense real third-order tensor.
///
/// Data is stored frontal-slice-major (`k` outermost) and row-major within
/// each frontal slice. The layout is part of the public contract: it is the
/// order used by [`Tensor3::data`] and by the `T3R1` file format.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor3 {
    dims: Dims,
    data: Vec<f64>,
}

impl Tensor3 {
    /// Builds a tensor, rejecting wrong lengths and non-finite entries.
    pub fn new(dims: impl Into<Dims>, data: Vec<f64>) -> Result<Self> {
        let dims = dims.into();
        dims.validate()?;
        if data.len() != dims.len() {
            return Err(Error::shape(format!(
                "data length {} does not match dims {dims} ({} entries)",
                data.len(),
                dims.len()
            )));
        }
        if let Some(idx) = data.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite(idx));
        }
        Ok(Tensor3 { dims, data })
    }

    /// Internal constructor for data produced by finite arithmetic on valid tensors.
    pub(crate) fn from_raw(dims: Dims, data: Vec<f64>) -> Self {
        debug_assert_eq!(dims.len(), data.len());
        Tensor3 { dims, data }
    }

    pub fn zeros(n1: usize, n2: usize, n3: usize) -> Self {
        let dims = Dims::new(n1, n2, n3);
        Tensor3 {
            dims,
            data: vec![0.0; dims.len()],
        }
    }

    pub fn from_fn(
        n1: usize,
        n2: usize,
        n3: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Self {
        let dims = Dims::new(n1, n2, n3);
        let mut data = Vec::with_capacity(dims.len());
        for k in 0..n3 {
            for i in 0..n1 {
                for j in 0..n2 {
                    data.push(f(i, j, k));
                }
            }
        }
        Tensor3 { dims, data }
    }

    /// I.i.d. `N(0, std^2)` entries drawn in layout order.
    pub fn random_normal<R: Rng + ?Sized>(dims: impl Into<Dims>, std: f64, rng: &mut R) -> Self {
        let dims = dims.into();
        let data = (0..dims.len())
            .map(|_| std * rng.sample::<f64, _>(StandardNormal))
            .collect();
        Tensor3 { dims, data }
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.dims.n1, self.dims.n2, self.dims.n3)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[self.dims.offset(i, j, k)]
    }

    /// Frontal slice `k` as a row-major `n1 x n2` block.
    pub fn frontal_slice(&self, k: usize) -> &[f64] {
        let len = self.dims.slice_len();
        &self.data[k * len..(k + 1) * len]
    }

    pub fn tube(&self, i: usize, j: usize) -> Vec<f64> {
        (0..self.dims.n3).map(|k| self.get(i, j, k)).collect()
    }

    pub fn ensure_same_dims(&self, other: &Tensor3, what: &str) -> Result<()> {
        if self.dims != other.dims {
            return Err(Error::shape(format!(
                "{what}: {} vs {}",
                self.dims, other.dims
            )));
        }
        Ok(())
    }

    pub fn scale(&self, c: f64) -> Tensor3 {
        self.map(|x| c * x)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor3 {
        Tensor3 {
            dims: self.dims,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn add(&self, other: &Tensor3) -> Result<Tensor3> {
        self.zip_with(other, "add", |a, b| a + b)
    }

    pub fn sub(&self, other: &Tensor3) -> Result<Tensor3> {
        self.zip_with(other, "sub", |a, b| a - b)
    }

    /// `self + alpha * other`.
    pub fn axpy(&self, alpha: f64, other: &Tensor3) -> Result<Tensor3> {
        self.zip_with(other, "axpy", |a, b| a + alpha * b)
    }

    fn zip_with(
        &self,
        other: &Tensor3,
        what: &str,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Tensor3> {
        self.ensure_same_dims(other, what)?;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Ok(Tensor3 {
            dims: self.dims,
            data,
        })
    }

    pub fn fro_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn inner(&self, other: &Tensor3) -> Result<f64> {
        self.ensure_same_dims(other, "inner")?;
        Ok(dot(&self.data, &other.data))
    }

    pub fn is_square(&self) -> bool {
        self.dims.n1 == self.dims.n2
    }

    /// Lateral slices `cols` of every frontal slice, i.e. `A(:, cols, :)`.
    pub fn columns(&self, cols: Range<usize>) -> Result<Tensor3> {
        let Dims { n1, n2, n3 } = self.dims;
        if cols.end > n2 || cols.start >= cols.end {
            return Err(Error::shape(format!(
                "column range {cols:?} out of 0..{n2}"
            )));
        }
        let w = cols.len();
        Ok(Tensor3::from_fn(n1, w, n3, |i, j, k| {
            self.get(i, cols.start + j, k)
        }))
    }

    /// Relative Frobenius distance `||self - other||_F / max(1, ||other||_F)`.
    pub fn rel_distance(&self, other: &Tensor3) -> Result<f64> {
        Ok(self.sub(other)?.fro_norm() / other.fro_norm().max(1.0))
    }
}

/// Fixed-order dot product. Eight independent accumulators let the compiler
/// vectorize while keeping the result independent of the caller.
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 8];
    let chunks = a.len() / 8;
    for c in 0..chunks {
        let base = c * 8;
        for l in 0..8 {
            acc[l] += a[base + l] * b[base + l];
        }
    }
    let mut tail = 0.0;
    for idx in chunks * 8..a.len() {
        tail += a[idx] * b[idx];
    }
    ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_length_and_nan() {
        assert!(matches!(
            Tensor3::new((2, 2, 2), vec![0.0; 7]),
            Err(Error::ShapeMismatch(_))
        ));
        let mut data = vec![0.0; 8];
        data[5] = f64::NAN;
        assert!(matches!(
            Tensor3::new((2, 2, 2), data),
            Err(Error::NonFinite(5))
        ));
        assert!(matches!(
            Tensor3::new((0, 2, 2), vec![]),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn layout_is_slice_major() {
        let t = Tensor3::new((2, 3, 2), (0..12).map(f64::from).collect()).unwrap();
        assert_eq!(t.get(0, 0, 1), 6.0);
        assert_eq!(t.get(1, 2, 0), 5.0);
        assert_eq!(t.frontal_slice(1), &[6.0, 7.0, 8.0, 9.0, 10.0, 11.0]);
        assert_eq!(t.tube(1, 0), vec![3.0, 9.0]);
    }

    #[test]
    fn dot_matches_naive_sum() {
        let a: Vec<f64> = (0..37).map(|x| x as f64 * 0.5).collect();
        let b: Vec<f64> = (0..37).map(|x| 1.0 - x as f64).collect();
        let naive: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
        assert!((dot(&a, &b) - naive).abs() < 1e-9);
    }

    #[test]
    fn columns_selects_lateral_slices() {
        let t = Tensor3::from_fn(2, 4, 3, |i, j, k| (100 * k + 10 * i + j) as f64);
        let c = t.columns(1..3).unwrap();
        assert_eq!(c.shape(), (2, 2, 3));
        assert_eq!(c.get(1, 1, 2), 212.0);
        assert!(t.columns(3..5).is_err());
    }
}
