use ebp_core::metrics::{emd, evaluate, rmse, DiscreteFodf};
use ebp_core::simulate::{generate, SimulationConfig};
use ebp_core::sphere::random_unit;
use nalgebra::{DMatrix, DVector, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn ground(u: &Vector3<f64>, v: &Vector3<f64>) -> f64 {
    (u.dot(v).abs() / (u.norm() * v.norm())).min(1.0).acos()
}

/// Minimum cost over every basic solution of the transportation
/// constraints: each subset of `m + k - 1` cells is solved by least squares
/// and kept when it satisfies the marginals with nonnegative flows.
fn enumerate_transport(cost: &DMatrix<f64>, a: &[f64], b: &[f64]) -> f64 {
    let (m, k) = cost.shape();
    let cells: Vec<(usize, usize)> = (0..m).flat_map(|i| (0..k).map(move |j| (i, j))).collect();
    let size = m + k - 1;
    let rhs = DVector::from_iterator(m + k, a.iter().chain(b).copied());
    let mut best = f64::INFINITY;
    for mask in 0u32..(1 << cells.len()) {
        if mask.count_ones() as usize != size {
            continue;
        }
        let basis: Vec<(usize, usize)> = cells
            .iter()
            .enumerate()
            .filter(|(c, _)| mask & (1 << c) != 0)
            .map(|(_, cell)| *cell)
            .collect();
        let mut sys = DMatrix::zeros(m + k, size);
        for (col, &(i, j)) in basis.iter().enumerate() {
            sys[(i, col)] = 1.0;
            sys[(m + j, col)] = 1.0;
        }
        let x = sys.clone().svd(true, true).solve(&rhs, 1e-12).unwrap();
        if (&sys * &x - &rhs).amax() > 1e-10 || x.iter().any(|v| *v < -1e-12) {
            continue;
        }
        let c: f64 = basis.iter().zip(x.iter()).map(|(&(i, j), f)| cost[(i, j)] * f).sum();
        best = best.min(c);
    }
    best
}

fn random_fodf(rng: &mut ChaCha8Rng, max: usize) -> Vec<(Vector3<f64>, f64)> {
    let n = rng.random_range(1..=max);
    (0..n).map(|_| (random_unit(rng), rng.random_range(0.05..1.0))).collect()
}

#[test]
fn emd_matches_enumeration_on_small_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for _ in 0..200 {
        let a = random_fodf(&mut rng, 3);
        let b = random_fodf(&mut rng, 3);
        let (ta, tb): (f64, f64) = (a.iter().map(|s| s.1).sum(), b.iter().map(|s| s.1).sum());
        let cost = DMatrix::from_fn(a.len(), b.len(), |i, j| ground(&a[i].0, &b[j].0));
        let wa: Vec<f64> = a.iter().map(|s| s.1 / ta).collect();
        let wb: Vec<f64> = b.iter().map(|s| s.1 / tb).collect();
        let expected = enumerate_transport(&cost, &wa, &wb);
        let got = emd(&DiscreteFodf::new(a), &DiscreteFodf::new(b)).unwrap();
        assert!((got - expected).abs() < 1e-10, "{got} vs {expected}");
    }
}

#[test]
fn emd_is_a_metric() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..200 {
        let [a, b, c] = [0, 1, 2].map(|_| DiscreteFodf::new(random_fodf(&mut rng, 5)));
        let (ab, ba) = (emd(&a, &b).unwrap(), emd(&b, &a).unwrap());
        assert!((ab - ba).abs() < 1e-12);
        assert!(emd(&a, &a).unwrap().abs() < 1e-12);
        assert!(ab >= 0.0);
        let (ac, bc) = (emd(&a, &c).unwrap(), emd(&b, &c).unwrap());
        assert!(ac <= ab + bc + 1e-12);
    }
}

#[test]
fn rmse_matches_direct_recomputation() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let a = DVector::from_fn(50, |_, _| rng.random::<f64>());
    let b = DVector::from_fn(50, |_, _| rng.random::<f64>());
    let mut s = 0.0;
    for i in 0..50 {
        s += (a[i] - b[i]) * (a[i] - b[i]);
    }
    assert!((rmse(&a, &b).unwrap() - (s / 50.0).sqrt()).abs() < 1e-15);
}

#[test]
fn truth_scores_zero_on_noiseless_data() {
    let sim = generate(&SimulationConfig {
        noise_sigma2: 0.0,
        seed: 3,
        ..Default::default()
    })
    .unwrap();
    let e = evaluate(&sim.truth.model, &sim.signal, &sim.scheme, &sim.train, &sim.test, Some(&sim.truth)).unwrap();
    assert_eq!((e.train_rmse, e.test_rmse), (0.0, 0.0));
    assert!(e.emd.unwrap().abs() < 1e-12);
    let no_truth = evaluate(&sim.truth.model, &sim.signal, &sim.scheme, &sim.train, &sim.test, None).unwrap();
    assert_eq!(no_truth.emd, None);
}
