use ebp_core::{nnls_solve, nnls_solve_warm, NnlsProblem};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Minimum of `||y - X b||^2` over all supports whose unconstrained least
/// squares solution is nonnegative. The optimum has a support of linearly
/// independent columns, on which the LS solution is unique and feasible, so
/// this equals the NNLS optimum.
fn brute_force(x: &DMatrix<f64>, y: &DVector<f64>) -> f64 {
    let (n, p) = x.shape();
    let mut best = y.norm_squared();
    for mask in 1u32..(1 << p) {
        let cols: Vec<usize> = (0..p).filter(|j| mask & (1 << j) != 0).collect();
        if cols.len() > n {
            continue;
        }
        let sub = DMatrix::from_fn(n, cols.len(), |i, k| x[(i, cols[k])]);
        let svd = sub.clone().svd(true, true);
        if svd.singular_values.min() < 1e-10 * svd.singular_values.max() {
            continue;
        }
        let b = svd.solve(y, 0.0).unwrap();
        if b.iter().all(|v| *v >= -1e-12) {
            best = best.min((y - &sub * b).norm_squared());
        }
    }
    best
}

fn random_problem(seed: u64, n: usize, p: usize) -> (DMatrix<f64>, DVector<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = DMatrix::from_fn(n, p, |_, _| rng.random::<f64>());
    let y = DVector::from_fn(n, |_, _| rng.random_range(-0.5..1.5));
    (x, y)
}

fn solve(x: &DMatrix<f64>, y: &DVector<f64>) -> ebp_core::NnlsSolution {
    nnls_solve(&NnlsProblem::new(x.clone(), y.clone()).unwrap()).unwrap()
}

#[test]
fn six_by_ten_matches_enumeration() {
    let (x, y) = random_problem(2024, 6, 10);
    let sol = solve(&x, &y);
    let oracle = brute_force(&x, &y);
    assert!((sol.objective - oracle).abs() <= 1e-8 * oracle.max(1e-300), "{} vs {oracle}", sol.objective);
}

#[test]
fn empty_warm_start_is_cold_start() {
    let (x, y) = random_problem(5, 7, 11);
    let p = NnlsProblem::new(x, y).unwrap();
    assert_eq!(nnls_solve_warm(&p, &[]).unwrap(), nnls_solve(&p).unwrap());
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 256, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn optimal_and_kkt(seed in any::<u64>(), n in 1usize..=8, p in 1usize..=12) {
        let (x, y) = random_problem(seed, n, p);
        let sol = solve(&x, &y);
        let oracle = brute_force(&x, &y);
        prop_assert!((sol.objective - oracle).abs() <= 1e-8 * oracle.max(1e-12));
        prop_assert!(sol.coefficients.iter().all(|b| *b >= 0.0));
        prop_assert!(sol.kkt_ratio(&x) <= 1.0);
        let r = &y - &x * &sol.coefficients;
        prop_assert!((r - &sol.residual).amax() <= 1e-10 * y.norm().max(1.0));
        // active set is exactly the positive support
        let support: Vec<usize> = (0..p).filter(|&j| sol.coefficients[j] > 0.0).collect();
        prop_assert_eq!(support, sol.active_set.clone());
    }

    #[test]
    fn warm_start_reaches_the_same_objective(seed in any::<u64>(), n in 2usize..=8, p in 1usize..=12) {
        let (x, y) = random_problem(seed, n, p);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xA5A5);
        let warm: Vec<usize> = (0..p).filter(|_| rng.random_bool(0.4)).collect();
        let prob = NnlsProblem::new(x, y).unwrap();
        let cold = nnls_solve(&prob).unwrap();
        let hot = nnls_solve_warm(&prob, &warm).unwrap();
        prop_assert!((cold.objective - hot.objective).abs() <= 1e-8 * cold.objective.max(1e-12));
    }

    #[test]
    fn scaling_the_target_scales_the_solution(seed in any::<u64>(), s in 0.1f64..10.0) {
        let (x, y) = random_problem(seed, 6, 9);
        let a = solve(&x, &y);
        let b = solve(&x, &(&y * s));
        prop_assert!((b.objective - s * s * a.objective).abs() <= 1e-8 * (s * s * a.objective).max(1e-12));
    }
}
