use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tubal_fgd::t_algebra::{
    bcirc_matrix, conj_transpose, fft3, fold, gram_product, identity_tensor, ifft3, inner,
    spectral_norm, sym, t_product, unfold,
};
use tubal_fgd::{Error, Tensor3};

fn rand_tensor(dims: (usize, usize, usize), seed: u64) -> Tensor3 {
    Tensor3::random_normal(dims, 1.0, &mut ChaCha8Rng::seed_from_u64(seed))
}

fn close(a: &Tensor3, b: &Tensor3, tol: f64) -> bool {
    a.sub(b).unwrap().fro_norm() <= tol * b.fro_norm().max(1.0)
}

#[test]
fn identity_is_neutral() {
    let a = rand_tensor((4, 3, 5), 1);
    let left = t_product(&identity_tensor(4, 5), &a).unwrap();
    let right = t_product(&a, &identity_tensor(3, 5)).unwrap();
    assert!(close(&left, &a, 1e-13));
    assert!(close(&right, &a, 1e-13));
}

#[test]
fn single_slice_product_is_matrix_product() {
    let a = Tensor3::new((2, 2, 1), vec![1.0, 2.0, 3.0, 4.0]).unwrap();
    let b = Tensor3::new((2, 1, 1), vec![5.0, 6.0]).unwrap();
    let c = t_product(&a, &b).unwrap();
    assert!((c.get(0, 0, 0) - 17.0).abs() < 1e-12);
    assert!((c.get(1, 0, 0) - 39.0).abs() < 1e-12);
}

#[test]
fn product_rejects_mismatched_shapes() {
    let a = Tensor3::zeros(2, 3, 4);
    let b = Tensor3::zeros(2, 3, 4);
    assert!(matches!(t_product(&a, &b), Err(Error::ShapeMismatch(_))));
    let c = Tensor3::zeros(3, 3, 2);
    assert!(matches!(t_product(&a, &c), Err(Error::ShapeMismatch(_))));
}

#[test]
fn transpose_reverses_tail_slices() {
    let a = rand_tensor((2, 3, 4), 2);
    let at = conj_transpose(&a);
    assert_eq!(at.shape(), (3, 2, 4));
    for k in 0..4 {
        for i in 0..2 {
            for j in 0..3 {
                assert_eq!(at.get(j, i, (4 - k) % 4), a.get(i, j, k));
            }
        }
    }
}

#[test]
fn fft_round_trip() {
    let a = rand_tensor((3, 4, 6), 3);
    let back = ifft3(&fft3(&a)).unwrap();
    assert!(close(&back, &a, 1e-14));
}

#[test]
fn unfold_fold_round_trip() {
    let a = rand_tensor((3, 2, 5), 4);
    assert_eq!(fold(&unfold(&a), 5).unwrap().data(), a.data());
    assert_eq!(bcirc_matrix(&a).unwrap().nrows(), 15);
}

#[test]
fn gram_product_is_symmetric_psd() {
    let f = rand_tensor((5, 2, 4), 5);
    let x = gram_product(&f).unwrap();
    assert!(close(&conj_transpose(&x), &x, 1e-13));
    let z = rand_tensor((5, 5, 4), 6);
    // <Z, F F^*> equals the trace of the first slice of F^* Z F.
    let zs = sym(&z).unwrap();
    let fz = t_product(&t_product(&conj_transpose(&f), &zs).unwrap(), &f).unwrap();
    let lhs = inner(&zs, &x).unwrap();
    let trace0: f64 = (0..2).map(|i| fz.get(i, i, 0)).sum::<f64>();
    assert!((lhs - trace0).abs() <= 1e-10 * lhs.abs().max(1.0));
}

#[test]
fn spectral_norm_of_identity_is_one() {
    assert!((spectral_norm(&identity_tensor(3, 5)).unwrap() - 1.0).abs() < 1e-14);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn product_matches_block_circulant(
        n1 in 1usize..5, n2 in 1usize..5, q in 1usize..5, n3 in 1usize..6, seed in any::<u64>()
    ) {
        let a = rand_tensor((n1, n2, n3), seed);
        let b = rand_tensor((n2, q, n3), seed ^ 1);
        let ab = t_product(&a, &b).unwrap();
        let oracle = fold(&(&bcirc_matrix(&a).unwrap() * &unfold(&b)), n3).unwrap();
        prop_assert!(close(&ab, &oracle, 1e-10));
    }

    #[test]
    fn transpose_of_product(
        n1 in 1usize..5, n2 in 1usize..5, q in 1usize..5, n3 in 1usize..6, seed in any::<u64>()
    ) {
        let a = rand_tensor((n1, n2, n3), seed);
        let b = rand_tensor((n2, q, n3), seed ^ 2);
        let lhs = conj_transpose(&t_product(&a, &b).unwrap());
        let rhs = t_product(&conj_transpose(&b), &conj_transpose(&a)).unwrap();
        prop_assert!(close(&lhs, &rhs, 1e-10));
    }

    #[test]
    fn transpose_is_an_involution(n1 in 1usize..6, n2 in 1usize..6, n3 in 1usize..7, seed in any::<u64>()) {
        let a = rand_tensor((n1, n2, n3), seed);
        let back = conj_transpose(&conj_transpose(&a));
        prop_assert_eq!(back.data(), a.data());
    }

    #[test]
    fn parseval(n1 in 1usize..6, n2 in 1usize..6, n3 in 1usize..7, seed in any::<u64>()) {
        let a = rand_tensor((n1, n2, n3), seed);
        let f2 = a.fro_norm().powi(2);
        let spec = fft3(&a).fro_norm().powi(2) / n3 as f64;
        prop_assert!((f2 - spec).abs() <= 1e-10 * f2);
    }

    #[test]
    fn sym_is_idempotent_and_symmetric(n in 1usize..6, n3 in 1usize..7, seed in any::<u64>()) {
        let a = rand_tensor((n, n, n3), seed);
        let s = sym(&a).unwrap();
        prop_assert!(close(&conj_transpose(&s), &s, 1e-15));
        prop_assert!(close(&sym(&s).unwrap(), &s, 1e-15));
    }

    #[test]
    fn spectral_norm_bounds(n1 in 1usize..5, n2 in 1usize..5, n3 in 1usize..5, seed in any::<u64>()) {
        let a = rand_tensor((n1, n2, n3), seed);
        let sn = spectral_norm(&a).unwrap();
        // |A| <= sqrt(n3) |A|_F and |A|_F <= sqrt(min(n1, n2)) |A|.
        prop_assert!(sn <= (n3 as f64).sqrt() * a.fro_norm() * (1.0 + 1e-12));
        prop_assert!(a.fro_norm() <= (n1.min(n2) as f64).sqrt() * sn * (1.0 + 1e-12));
    }
}
