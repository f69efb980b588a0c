mod common;

use bilarx_core::prox::{box_clip, nuclear_norm, row_diff, row_diff_adjoint, row_group_shrink, svt, thin_svd};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::SeedableRng;

use common::{cubic_eigenvalues, prox_nuclear_2x2_oracle, prox_rows_2x2_oracle, random_matrix};

fn matrix_strategy(rows: usize, cols: usize) -> impl Strategy<Value = DMatrix<f64>> {
    prop::collection::vec(-10.0..10.0f64, rows * cols).prop_map(move |v| DMatrix::from_vec(rows, cols, v))
}

fn rotation(theta: f64) -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 2, &[theta.cos(), -theta.sin(), theta.sin(), theta.cos()])
}

#[test]
fn singular_values_match_cubic_gram_oracle() {
    let mut rng = StdRng::seed_from_u64(1);
    for _ in 0..100 {
        let m = random_matrix(&mut rng, 6, 3);
        let eig = cubic_eigenvalues(&m.tr_mul(&m));
        let svd = thin_svd(&m).unwrap();
        for (s, e) in svd.singular_values.iter().zip(eig) {
            assert!((s * s - e).abs() <= 1e-8 * eig[0], "{} vs {}", s * s, e);
        }
    }
}

#[test]
fn svt_threshold_at_second_singular_value_is_rank_one() {
    let mut rng = StdRng::seed_from_u64(2);
    let m = random_matrix(&mut rng, 8, 3);
    let s = thin_svd(&m).unwrap().singular_values;
    let out = thin_svd(&svt(&m, s[1]).unwrap()).unwrap().singular_values;
    assert!((out[0] - (s[0] - s[1])).abs() < 1e-10);
    assert!(out[1] < 1e-10 && out[2] < 1e-10);
}

#[test]
fn svt_matches_direct_minimization_on_2x2() {
    let mut rng = StdRng::seed_from_u64(3);
    for _ in 0..12 {
        let m = random_matrix(&mut rng, 2, 2) * 3.0;
        let s = thin_svd(&m).unwrap().singular_values;
        // Thresholds below, between and above the singular values.
        for tau in [0.5 * s[1], 0.5 * (s[0] + s[1]), 1.1 * s[0]] {
            let got = svt(&m, tau).unwrap();
            let want = prox_nuclear_2x2_oracle(&m, tau);
            assert!((&got - &want).amax() <= 1e-6, "tau {tau}: {got} vs {want}");
        }
    }
}

#[test]
fn row_shrink_matches_direct_minimization_on_2x2() {
    let mut rng = StdRng::seed_from_u64(4);
    for _ in 0..20 {
        let m = random_matrix(&mut rng, 2, 2) * 3.0;
        for kappa in [0.0, 0.3, 1.0, 2.5] {
            let got = row_group_shrink(&m, kappa).unwrap();
            let want = prox_rows_2x2_oracle(&m, kappa);
            assert!((&got - &want).amax() <= 1e-6, "kappa {kappa}: {got} vs {want}");
        }
    }
}

#[test]
fn row_diff_adjoint_identity_on_random_pairs() {
    let mut rng = StdRng::seed_from_u64(5);
    for _ in 0..50 {
        let m = random_matrix(&mut rng, 9, 3);
        let d = random_matrix(&mut rng, 8, 3);
        let lhs = row_diff(&m).unwrap().dot(&d);
        let rhs = m.dot(&row_diff_adjoint(&d));
        assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
    }
}

proptest! {
    #[test]
    fn svd_reconstructs(m in matrix_strategy(7, 3)) {
        let svd = thin_svd(&m).unwrap();
        let s1 = svd.singular_values[0];
        prop_assert!((svd.reconstruct() - &m).norm() <= 1e-9 * s1.max(1e-300));
        prop_assert!(svd.singular_values.windows(2).all(|w| w[0] >= w[1]));
        prop_assert!(svd.singular_values.iter().all(|&s| s >= 0.0));
        let vtv = svd.right_vectors.tr_mul(&svd.right_vectors);
        prop_assert!((vtv - DMatrix::identity(3, 3)).amax() < 1e-10);
    }

    #[test]
    fn singular_values_ignore_row_order(m in matrix_strategy(6, 2), shift in 1usize..6) {
        let permuted = DMatrix::from_fn(6, 2, |r, c| m[((r + shift) % 6, c)]);
        let a = thin_svd(&m).unwrap().singular_values;
        let b = thin_svd(&permuted).unwrap().singular_values;
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() <= 1e-10 * (1.0 + a[0]));
        }
    }

    #[test]
    fn svt_nuclear_norm_identity(m in matrix_strategy(6, 3), tau in 0.0..8.0f64) {
        let s = thin_svd(&m).unwrap().singular_values;
        let expect: f64 = s.iter().map(|v| (v - tau).max(0.0)).sum();
        let got = nuclear_norm(&svt(&m, tau).unwrap()).unwrap();
        prop_assert!((got - expect).abs() <= 1e-9 * (1.0 + expect));
        prop_assert!(got <= nuclear_norm(&m).unwrap() + 1e-9);
    }

    #[test]
    fn svt_is_nonexpansive(a in matrix_strategy(5, 3), b in matrix_strategy(5, 3), tau in 0.0..5.0f64) {
        let d = (svt(&a, tau).unwrap() - svt(&b, tau).unwrap()).norm();
        prop_assert!(d <= (&a - &b).norm() * (1.0 + 1e-10) + 1e-12);
    }

    #[test]
    fn row_shrink_is_nonexpansive(a in matrix_strategy(5, 3), b in matrix_strategy(5, 3), k in 0.0..5.0f64) {
        let d = (row_group_shrink(&a, k).unwrap() - row_group_shrink(&b, k).unwrap()).norm();
        prop_assert!(d <= (&a - &b).norm() * (1.0 + 1e-12) + 1e-12);
    }

    #[test]
    fn box_clip_is_nonexpansive_and_idempotent(
        a in prop::collection::vec(-5.0..5.0f64, 6),
        b in prop::collection::vec(-5.0..5.0f64, 6),
        bound in 0.0..3.0f64,
    ) {
        let (a, b) = (DVector::from_vec(a), DVector::from_vec(b));
        let (ca, cb) = (box_clip(&a, bound), box_clip(&b, bound));
        prop_assert!((&ca - &cb).norm() <= (&a - &b).norm() + 1e-15);
        prop_assert_eq!(box_clip(&ca, bound), ca);
    }

    #[test]
    fn row_shrink_commutes_with_rotation(m in matrix_strategy(5, 2), k in 0.0..5.0f64, theta in 0.0..6.3f64) {
        let q = rotation(theta);
        let lhs = row_group_shrink(&(&m * &q), k).unwrap();
        let rhs = row_group_shrink(&m, k).unwrap() * &q;
        prop_assert!((lhs - rhs).amax() <= 1e-10);
    }

    #[test]
    fn svt_commutes_with_rotation(m in matrix_strategy(5, 2), tau in 0.0..5.0f64, theta in 0.0..6.3f64) {
        let q = rotation(theta);
        let lhs = svt(&(&m * &q), tau).unwrap();
        let rhs = svt(&m, tau).unwrap() * &q;
        prop_assert!((lhs - rhs).amax() <= 1e-9);
    }
}
