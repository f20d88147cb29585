use gar_core::graph::{
    check_laplacian, check_normalized_laplacian, normalized_laplacian_from_adjacency, Adjacency, DEFAULT_EIG_TOL,
};
use gar_core::linalg::SymMatrix;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

mod common;
use common::random_adjacency;

#[test]
fn random_adjacencies_round_trip_with_sqrt_degree_null_vector() {
    for seed in 0..200u64 {
        let p = 2 + (seed as usize % 29);
        let a = random_adjacency(p, seed);
        let l = normalized_laplacian_from_adjacency(&a).unwrap().entries;
        let verdict = check_normalized_laplacian(&l, DEFAULT_EIG_TOL);
        assert!(verdict.passed, "seed {seed}: {:?}", verdict.conditions);
        assert!(!verdict.degenerate_null_space);

        let sqrt_d = a.degrees().map(f64::sqrt);
        let v = &sqrt_d / sqrt_d.norm();
        assert!((&l * &v).norm() <= 1e-10, "seed {seed}: residual {}", (&l * &v).norm());
        let found = verdict.null_vector.unwrap();
        assert!((found - &v).norm() <= 1e-6, "seed {seed}");
    }
}

#[test]
fn combinatorial_laplacian_of_random_graph_passes() {
    for seed in 0..50u64 {
        let a = random_adjacency(3 + seed as usize % 10, seed);
        let mut w = a.weights().clone();
        w.fill_diagonal(0.0);
        let deg = SymMatrix::from_diagonal(&DVector::from_iterator(w.nrows(), w.row_iter().map(|r| r.sum())));
        let l = deg - w;
        assert!(check_laplacian(&l, 1e-10).passed, "seed {seed}");
    }
}

#[test]
fn small_matrix_verdicts() {
    let ok = SymMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0]);
    assert!(check_laplacian(&ok, 1e-12).passed);
    let v = check_normalized_laplacian(&ok, 1e-12);
    assert!(v.passed);
    let h = 0.5f64.sqrt();
    let v0 = v.null_vector.unwrap();
    assert!((v0[0] - h).abs() < 1e-12 && (v0[1] - h).abs() < 1e-12);

    let rows = SymMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 2.0]);
    assert_eq!(check_laplacian(&rows, 1e-12).holds("zero_row_sums"), Some(false));
    let pos = SymMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0]);
    assert_eq!(check_laplacian(&pos, 1e-12).holds("off_diagonal_nonpositive"), Some(false));
    let big = SymMatrix::from_row_slice(2, 2, &[1.5, -1.0, -1.0, 1.0]);
    let v = check_normalized_laplacian(&big, 1e-12);
    assert!(!v.passed);
    assert_eq!(v.holds("diagonal_in_unit_interval"), Some(false));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn normalized_laplacian_is_valid(p in 2usize..12, seed in any::<u64>()) {
        let a = random_adjacency(p, seed);
        let l = normalized_laplacian_from_adjacency(&a).unwrap().entries;
        prop_assert!(check_normalized_laplacian(&l, DEFAULT_EIG_TOL).passed);
        for i in 0..p {
            prop_assert!(l[(i, i)] <= 1.0 + 1e-15);
            if a.weights()[(i, i)] > 0.0 {
                prop_assert!(l[(i, i)] < 1.0);
            }
        }
    }

    #[test]
    fn relabelling_permutes_entries(p in 2usize..10, seed in any::<u64>(), shift in 1usize..9) {
        let a = random_adjacency(p, seed);
        let perm: Vec<usize> = (0..p).map(|i| (i + shift) % p).collect();
        let w = a.weights();
        let wp = DMatrix::from_fn(p, p, |i, j| w[(perm[i], perm[j])]);
        let l = normalized_laplacian_from_adjacency(&Adjacency::new(wp).unwrap()).unwrap().entries;
        let l0 = normalized_laplacian_from_adjacency(&a).unwrap().entries;
        for i in 0..p {
            for j in 0..p {
                prop_assert!((l[(i, j)] - l0[(perm[i], perm[j])]).abs() < 1e-14);
            }
        }
    }
}
