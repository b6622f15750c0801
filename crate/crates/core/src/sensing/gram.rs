//! Normal-equation form of the measurement operator on symmetric tensors.
//!
//! For symmetric `X`, `<A_i, X> = <c(A_i), c(X)>` in orthonormal coordinates
//! of the symmetric subspace: one coordinate per transpose orbit `{p, q}`,
//! `(v_p + v_q)/sqrt(2)` for pairs and `v_p` for fixed points. Storing
//! `H = sum_i c_i c_i^T`, `b = sum_i y_i c_i` and `|y|^2` once turns every
//! later residual evaluation into a `d_s x d_s` matrix-vector product, with
//! `d_s ~ n^2 n3 / 2`, independent of `m`.

use faer::linalg::matmul::matmul;
use faer::linalg::matmul::triangular::{self, BlockStructure};
use faer::{Accum, ColMut, ColRef, Mat, MatRef, Par};

use super::ensemble::{transpose_partner, MeasurementEnsemble};
use crate::error::{Error, Result};
use crate::t_algebra::{dot, Dims, Tensor3};

const BUILD_CHUNK: usize = 1024;

/// Orthonormal coordinates of the symmetric subspace.
#[derive(Clone, Debug)]
pub struct SymCoords {
    dims: Dims,
    /// Orbit representatives `(p, q)` with `p <= q`, ordered by `p`.
    orbits: Vec<(usize, usize)>,
}

impl SymCoords {
    pub fn new(dims: Dims) -> Self {
        let orbits = (0..dims.len())
            .filter_map(|p| {
                let q = transpose_partner(dims, p);
                (p <= q).then_some((p, q))
            })
            .collect();
        SymCoords { dims, orbits }
    }

    /// Dimension of the symmetric subspace.
    pub fn len(&self) -> usize {
        self.orbits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.orbits.is_empty()
    }

    /// Coordinates of the symmetric part of `v`.
    pub fn project_slice(&self, v: &[f64], out: &mut [f64]) {
        for (o, &(p, q)) in out.iter_mut().zip(&self.orbits) {
            *o = if p == q {
                v[p]
            } else {
                (v[p] + v[q]) * std::f64::consts::FRAC_1_SQRT_2
            };
        }
    }

    pub fn project(&self, x: &Tensor3) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        self.project_slice(x.data(), &mut out);
        out
    }

    /// The symmetric tensor with coordinates `c`.
    pub fn embed(&self, c: &[f64]) -> Tensor3 {
        let mut data = vec![0.0; self.dims.len()];
        for (&v, &(p, q)) in c.iter().zip(&self.orbits) {
            if p == q {
                data[p] = v;
            } else {
                let half = v * std::f64::consts::FRAC_1_SQRT_2;
                data[p] = half;
                data[q] = half;
            }
        }
        Tensor3::from_raw(self.dims, data)
    }
}

/// Bytes needed by a [`GramOperator`] for tensors of shape `n x n x n3`.
pub fn gram_bytes(n: usize, n3: usize) -> usize {
    let d = n * n * n3;
    let ds = (d + n * if n3.is_multiple_of(2) { 2 } else { 1 }) / 2;
    ds.saturating_mul(ds)
        .saturating_mul(std::mem::size_of::<f64>())
}

#[derive(Clone, Debug)]
pub struct GramOperator {
    coords: SymCoords,
    h: Mat<f64>,
    b: Vec<f64>,
    yy: f64,
}

impl GramOperator {
    /// Accumulates `H`, `b` and `|y|^2` in one pass over the ensemble.
    pub fn build(ens: &MeasurementEnsemble, y: &[f64], budget: usize) -> Result<Self> {
        if y.len() != ens.m() {
            return Err(Error::shape(format!(
                "gram: {} observations for {} measurements",
                y.len(),
                ens.m()
            )));
        }
        Self::accumulate(ens, budget, |i, _| y[i]).map(|(op, _)| op)
    }

    /// Builds the operator and the observations `y_i = <A_i, X> + s_i` in
    /// the same pass. `y` is bit-identical to `measure(X) + s`.
    pub fn build_with_observations(
        ens: &MeasurementEnsemble,
        x: &Tensor3,
        noise: &[f64],
        budget: usize,
    ) -> Result<(Self, Vec<f64>)> {
        if x.dims() != ens.dims() || noise.len() != ens.m() {
            return Err(Error::shape(format!(
                "gram: tensor {} / {} noise values vs ensemble {} with {} measurements",
                x.dims(),
                noise.len(),
                ens.dims(),
                ens.m()
            )));
        }
        Self::accumulate(ens, budget, |i, a| dot(a, x.data()) + noise[i])
    }

    fn accumulate(
        ens: &MeasurementEnsemble,
        budget: usize,
        mut observe: impl FnMut(usize, &[f64]) -> f64,
    ) -> Result<(Self, Vec<f64>)> {
        let dims = ens.dims();
        let coords = SymCoords::new(dims);
        let ds = coords.len();
        let needed = ds
            .saturating_mul(ds)
            .saturating_mul(std::mem::size_of::<f64>());
        if needed > budget {
            return Err(Error::OutOfBudget { needed, budget });
        }
        let d = dims.len();
        let mut h = Mat::<f64>::zeros(ds, ds);
        let mut b = vec![0.0; ds];
        let mut y = Vec::with_capacity(ens.m());
        let mut buf = Vec::new();
        let mut c = Mat::<f64>::zeros(0, 0);
        ens.for_each_chunk(BUILD_CHUNK, |start, rows| {
            let k = rows.len() / d;
            buf.resize(k * ds, 0.0);
            for (o, (a, row)) in rows.chunks(d).zip(buf.chunks_mut(ds)).enumerate() {
                let w = observe(start + o, a);
                y.push(w);
                coords.project_slice(a, row);
                b.iter_mut()
                    .zip(row.iter())
                    .for_each(|(bj, v)| *bj += w * v);
            }
            if c.nrows() != k {
                c = Mat::zeros(k, ds);
            }
            c.as_mut()
                .copy_from(MatRef::from_row_major_slice(&buf, k, ds));
            triangular::matmul(
                h.as_mut(),
                BlockStructure::TriangularLower,
                Accum::Add,
                c.transpose(),
                BlockStructure::Rectangular,
                c.as_ref(),
                BlockStructure::Rectangular,
                1.0,
                Par::Seq,
            );
        });
        for j in 0..ds {
            for i in 0..j {
                h[(i, j)] = h[(j, i)];
            }
        }
        let yy = dot(&y, &y);
        Ok((GramOperator { coords, h, b, yy }, y))
    }

    pub fn coords(&self) -> &SymCoords {
        &self.coords
    }

    /// `sym(M^*(y))`.
    pub fn adjoint_observations(&self) -> Tensor3 {
        self.coords.embed(&self.b)
    }

    /// For symmetric `X`: `sym(M^*(M(X) - y))` and `1/4 |y - M(X)|^2`.
    pub fn residual_gradient(&self, x: &Tensor3) -> (Tensor3, f64) {
        let proj = self.coords.project(x);
        let mut hx = vec![0.0; self.coords.len()];
        matmul(
            ColMut::from_slice_mut(&mut hx),
            Accum::Replace,
            self.h.as_ref(),
            ColRef::from_slice(&proj),
            1.0,
            Par::Seq,
        );
        let quad = dot(&proj, &hx);
        let lin = dot(&proj, &self.b);
        let objective = 0.25 * (quad - 2.0 * lin + self.yy);
        let g: Vec<f64> = hx.iter().zip(&self.b).map(|(h, b)| h - b).collect();
        (self.coords.embed(&g), objective)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sensing::{make_ensemble, Materialization, MeasurementMode};
    use crate::t_algebra::{gram_product, sym};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn coordinates_are_orthonormal() {
        let dims = Dims::new(3, 3, 4);
        let c = SymCoords::new(dims);
        assert_eq!(c.len(), (36 + 6) / 2);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = sym(&Tensor3::random_normal(dims, 1.0, &mut rng)).unwrap();
        let y = sym(&Tensor3::random_normal(dims, 1.0, &mut rng)).unwrap();
        let (cx, cy) = (c.project(&x), c.project(&y));
        assert!((dot(&cx, &cy) - x.inner(&y).unwrap()).abs() < 1e-12);
        assert!(c.embed(&cx).sub(&x).unwrap().fro_norm() < 1e-14);
        assert_eq!(gram_bytes(3, 4), c.len() * c.len() * 8);
    }

    #[test]
    fn matches_direct_evaluation() {
        let ens = make_ensemble(
            4,
            3,
            60,
            5,
            MeasurementMode::PlainGaussian,
            Materialization::default(),
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let y: Vec<f64> = (0..60).map(|i| (i as f64 * 0.37).sin()).collect();
        let op = GramOperator::build(&ens, &y, usize::MAX).unwrap();
        let f = Tensor3::random_normal((4, 2, 3), 1.0, &mut rng);
        let x = sym(&gram_product(&f).unwrap()).unwrap();

        let mx = ens.measure(&x).unwrap();
        let r: Vec<f64> = mx.iter().zip(&y).map(|(a, b)| a - b).collect();
        let g = sym(&ens.adjoint(&r).unwrap()).unwrap();
        let obj = 0.25 * dot(&r, &r);

        let (g2, obj2) = op.residual_gradient(&x);
        assert!(g2.sub(&g).unwrap().fro_norm() <= 1e-10 * g.fro_norm());
        assert!((obj2 - obj).abs() <= 1e-10 * obj.max(1.0));
        let a = sym(&ens.adjoint(&y).unwrap()).unwrap();
        assert!(op.adjoint_observations().sub(&a).unwrap().fro_norm() <= 1e-12 * a.fro_norm());
    }

    #[test]
    fn budget_is_enforced() {
        let ens = make_ensemble(
            4,
            3,
            10,
            5,
            MeasurementMode::PlainGaussian,
            Materialization::default(),
        )
        .unwrap();
        assert!(matches!(
            GramOperator::build(&ens, &[0.0; 10], 100),
            Err(Error::OutOfBudget { .. })
        ));
    }

    #[test]
    fn fused_observations_match_measure() {
        let ens = make_ensemble(
            4,
            3,
            40,
            8,
            MeasurementMode::Symmetrized,
            Materialization::default(),
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = sym(&Tensor3::random_normal((4, 4, 3), 1.0, &mut rng)).unwrap();
        let noise: Vec<f64> = (0..40).map(|i| 0.01 * i as f64).collect();
        let (op, y) = GramOperator::build_with_observations(&ens, &x, &noise, usize::MAX).unwrap();
        let expected: Vec<f64> = ens
            .measure(&x)
            .unwrap()
            .iter()
            .zip(&noise)
            .map(|(a, s)| a + s)
            .collect();
        assert_eq!(y, expected);
        let plain = GramOperator::build(&ens, &y, usize::MAX).unwrap();
        assert_eq!(op.b, plain.b);
    }
}
