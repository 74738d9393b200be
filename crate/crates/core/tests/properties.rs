use proptest::prelude::*;

use sparsepc::crossval::{split_indices, CrossValPlan};
use sparsepc::femsolver::{assemble_solve, Mesh1D};
use sparsepc::linalg::norm2;
use sparsepc::oracle::{rms_error, CoefficientVector};
use sparsepc::pcbasis::{self, BasisSpec, MultiIndex, MultiIndexSet};
use sparsepc::sampling::draw_samples;
use sparsepc::solvers::project_weighted_l1;

fn vec_and_weights(n: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>, Vec<f64>)> {
    (
        prop::collection::vec(-5.0..5.0f64, n),
        prop::collection::vec(-5.0..5.0f64, n),
        prop::collection::vec(0.1..3.0f64, n),
    )
}

proptest! {
    #[test]
    fn projection_is_feasible_and_nonexpansive(
        (a, b, w) in (1usize..12).prop_flat_map(vec_and_weights),
        tau in 0.0..10.0f64,
    ) {
        let pa = project_weighted_l1(&a, &w, tau);
        let pb = project_weighted_l1(&b, &w, tau);
        let l1: f64 = pa.iter().zip(&w).map(|(x, wi)| (x * wi).abs()).sum();
        prop_assert!(l1 <= tau * (1.0 + 1e-12) + 1e-12);
        let d_in: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
        let d_out: Vec<f64> = pa.iter().zip(&pb).map(|(x, y)| x - y).collect();
        prop_assert!(norm2(&d_out) <= norm2(&d_in) + 1e-10);
        // projecting twice changes nothing
        let ppa = project_weighted_l1(&pa, &w, tau);
        for (x, y) in pa.iter().zip(&ppa) {
            prop_assert!((x - y).abs() <= 1e-10);
        }
    }

    #[test]
    fn rms_error_triangle_inequality(
        v in prop::collection::vec(-3.0..3.0f64, 30),
    ) {
        let basis = BasisSpec::total_order(2, 3).unwrap();
        let p = basis.len();
        let make = |k: usize| CoefficientVector::new(basis.clone(), v[k * p..(k + 1) * p].to_vec()).unwrap();
        let (a, b, c) = (make(0), make(1), make(2));
        prop_assert!(rms_error(&a, &c) <= rms_error(&a, &b) + rms_error(&b, &c) + 1e-12);
        prop_assert!((rms_error(&a, &b) - rms_error(&b, &a)).abs() <= 1e-15);
    }

    #[test]
    fn canonical_order_ignores_input_order(p in 0usize..4, d in 1usize..5, seed in any::<u64>()) {
        let set = pcbasis::total_order_set(p, d).unwrap();
        let mut shuffled: Vec<MultiIndex> = set.indices().to_vec();
        let mut s = seed;
        for i in (1..shuffled.len()).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            shuffled.swap(i, (s >> 33) as usize % (i + 1));
        }
        let rebuilt = MultiIndexSet::from_indices(d, shuffled).unwrap();
        prop_assert_eq!(rebuilt.indices(), set.indices());
    }

    #[test]
    fn samples_are_nested(d in 1usize..6, n in 1usize..40, extra in 0usize..40, seed in any::<u64>()) {
        let small = draw_samples(d, n, seed);
        let large = draw_samples(d, n + extra, seed);
        prop_assert_eq!(small.points(), &large.points()[..n]);
        prop_assert!(large.points().iter().flatten().all(|x| (-1.0..=1.0).contains(x)));
    }

    #[test]
    fn splits_partition_the_samples(n in 4usize..200, seed in any::<u64>(), rep in 0usize..4) {
        let plan = CrossValPlan::new(n, seed).unwrap();
        let (r, v) = split_indices(&plan, rep).unwrap();
        prop_assert_eq!(r.len(), 3 * n / 4);
        let mut all: Vec<usize> = r.into_iter().chain(v).collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
    }

    #[test]
    fn symmetric_coefficients_give_symmetric_solutions(
        c0 in 0.1..2.0f64, c2 in 0.0..3.0f64, c4 in 0.0..3.0f64, f in -2.0..2.0f64, ne in 2usize..40,
    ) {
        let a = |x: f64| c0 + c2 * (x - 0.5).powi(2) + c4 * (x - 0.5).powi(4);
        let sol = assemble_solve(a, f, Mesh1D::uniform(ne).unwrap()).unwrap();
        let n = sol.dof_values.len();
        for k in 0..n {
            prop_assert!((sol.dof_values[k] - sol.dof_values[n - 1 - k]).abs() <= 1e-10);
        }
        if f >= 0.0 {
            prop_assert!(sol.dof_values.iter().all(|&u| u >= -1e-14));
        }
    }
}

/// Brute-force lattice enumeration of `{α ∈ ℕ^d : ‖α‖₁ ≤ p}`.
fn count_lattice(p: usize, d: usize) -> usize {
    fn rec(remaining: usize, dims: usize) -> usize {
        if dims == 0 {
            return 1;
        }
        (0..=remaining).map(|k| rec(remaining - k, dims - 1)).sum()
    }
    rec(p, d)
}

#[test]
fn cardinality_matches_lattice_enumeration() {
    for p in 0..=6 {
        for d in 1..=10 {
            let expected = count_lattice(p, d);
            assert_eq!(pcbasis::cardinality(p, d).unwrap(), expected, "p={p} d={d}");
            assert_eq!(pcbasis::total_order_set(p, d).unwrap().len(), expected);
        }
    }
}
