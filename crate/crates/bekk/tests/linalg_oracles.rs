//! Cross-checks of the linear-algebra layer against independent oracles
//! (cyclic Jacobi) and property tests of the structural identities.

mod common;

use bekk::fista::step_size;
use bekk::linalg::{
    duplication_matrix, elimination_matrix, kron, psd_project, rearrange, sym_eigen, true_split,
    vec_of, vech, vech_inv, SymMatrix, VechVector,
};
use common::*;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

#[test]
fn psd_projection_matches_jacobi_clip_oracle() {
    let mut r = rng(101);
    for _ in 0..10 {
        let m = random_symmetric(6, &mut r);
        let ours = psd_project(&SymMatrix::new(m.clone()).unwrap(), 0.0).unwrap();
        let oracle = jacobi_psd_clip(&m);
        assert!(
            (ours.as_matrix() - &oracle).norm() < 1e-9,
            "projection disagrees with eigen-clip oracle"
        );
    }
}

#[test]
fn sym_eigen_matches_jacobi_spectrum() {
    let mut r = rng(7);
    for n in [2usize, 4, 7, 12] {
        let m = random_symmetric(n, &mut r);
        let ours = sym_eigen(&SymMatrix::new(m.clone()).unwrap()).unwrap();
        let (oracle_vals, _) = jacobi_eigen(&m);
        for k in 0..n {
            assert!(
                (ours.values[k] - oracle_vals[k]).abs() < 1e-9 * m.norm().max(1.0),
                "eigenvalue {k} disagrees at n={n}"
            );
        }
    }
}

#[test]
fn step_size_matches_dense_spectrum_oracle() {
    let mut r = rng(55);
    let x = random_matrix(50, 20, &mut r);
    let eta = step_size(&x).unwrap();
    let (vals, _) = jacobi_eigen(&(x.transpose() * &x));
    let expected = 50.0 / vals[0];
    assert!((eta - expected).abs() / expected < 1e-5);
}

#[test]
fn rearranged_kron_sum_spectrum_reveals_components() {
    // the rearranged Kronecker sum of orthogonal components has exactly K
    // nonzero eigenvalues: the squared norms, with vectorized components as
    // eigenvectors
    let mut r = rng(31);
    for (n, k) in [(3usize, 2usize), (4, 3), (5, 2)] {
        let comps = orthogonal_components(n, k, &mut r);
        let g = kron_sum(&comps);
        let s = SymMatrix::symmetrize(&rearrange(&g).unwrap()).unwrap();
        let eig = sym_eigen(&s).unwrap();
        for (i, comp) in comps.iter().enumerate() {
            let expected = comp.norm_squared();
            assert!(
                (eig.values[i] - expected).abs() < 1e-10 * expected.max(1.0),
                "eigenvalue {i} should equal the squared norm"
            );
            let u = eig.vectors.column(i).clone_owned();
            let vec_a = vec_of(comp) / comp.norm();
            let align = u.dot(&vec_a).abs();
            assert!(align > 1.0 - 1e-8, "eigenvector {i} should align with vec(A)");
        }
        for i in k..n * n {
            assert!(eig.values[i].abs() < 1e-10, "tail eigenvalue {i} should vanish");
        }
    }
}

#[test]
fn pad_round_trip_with_general_orthogonal_components() {
    let mut r = rng(92);
    for n in 3..=5 {
        let comps = orthogonal_components(n, 2, &mut r);
        let g = kron_sum(&comps);
        let phi = bekk::linalg::selectors::compress_kron(n, &g).unwrap();
        let w = true_split(&comps).unwrap();
        let h = bekk::linalg::pad(&phi, &w).unwrap();
        assert!((h - &g).norm() < 1e-12 * g.norm().max(1.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn duplication_identity_holds(n in 1usize..=8, seed in 0u64..1000) {
        let mut r = rng(seed);
        let m = random_symmetric(n, &mut r);
        let sym = SymMatrix::new(m.clone()).unwrap();
        let lhs = duplication_matrix(n).unwrap().apply(vech(&sym).as_vector()).unwrap();
        prop_assert_eq!(lhs, vec_of(&m));
    }

    #[test]
    fn elimination_then_duplication_is_identity(n in 1usize..=8, seed in 0u64..1000) {
        let mut r = rng(seed);
        let m = random_symmetric(n, &mut r);
        let sym = SymMatrix::new(m.clone()).unwrap();
        let vech_again = elimination_matrix(n)
            .unwrap()
            .apply(&duplication_matrix(n).unwrap().apply(vech(&sym).as_vector()).unwrap())
            .unwrap();
        prop_assert_eq!(vech_again, vech(&sym).into_vector());
    }

    #[test]
    fn vech_round_trip(n in 1usize..=8, seed in 0u64..1000) {
        let mut r = rng(seed);
        let m = random_symmetric(n, &mut r);
        let sym = SymMatrix::new(m).unwrap();
        let back = vech_inv(&vech(&sym));
        prop_assert_eq!(back, sym);
    }

    #[test]
    fn rearrange_is_pure_permutation(n in 1usize..=5, seed in 0u64..1000) {
        let mut r = rng(seed);
        let a = random_matrix(n, n, &mut r);
        let g = kron(&a, &a);
        let out = rearrange(&g).unwrap();
        // multiset of entries preserved exactly: no arithmetic happened
        let mut before: Vec<f64> = g.iter().cloned().collect();
        let mut after: Vec<f64> = out.iter().cloned().collect();
        before.sort_by(f64::total_cmp);
        after.sort_by(f64::total_cmp);
        prop_assert_eq!(before, after);
        // and the defining identity holds entrywise
        let v = vec_of(&a);
        let rank1 = &v * v.transpose();
        for i in 0..n * n {
            for j in 0..n * n {
                prop_assert_eq!(out[(i, j)], rank1[(i, j)]);
            }
        }
    }

    #[test]
    fn psd_projection_nonexpansive_toward_cone(seed in 0u64..500) {
        let mut r = rng(seed);
        let m = random_symmetric(5, &mut r);
        // random PSD reference point
        let b = random_matrix(5, 5, &mut r);
        let psd_ref = &b * b.transpose();
        let proj = psd_project(&SymMatrix::new(m.clone()).unwrap(), 0.0).unwrap();
        let before = (&m - &psd_ref).norm();
        let after = (proj.as_matrix() - &psd_ref).norm();
        prop_assert!(after <= before + 1e-10);
    }

    #[test]
    fn vech_vector_rejects_non_triangular(len in 1usize..=40) {
        let ok = (1usize..=9).any(|n| n * (n + 1) / 2 == len);
        let got = VechVector::new(DVector::zeros(len));
        prop_assert_eq!(got.is_ok(), ok);
    }
}
