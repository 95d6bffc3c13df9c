use approx::assert_relative_eq;
use ebp_core::kernel::{
    bump1d_eval, bump1d_oracle, tensor_kernel_eval, tensor_kernel_grad, tensor_oracle, Bump1dParams,
    BumpKernel, OracleConfig,
};
use ebp_core::simulate::make_directions;
use ebp_core::sphere::{random_unit, tangent_basis};
use ebp_core::{AcquisitionScheme, RadialMode, TensorKernel, TensorParams};
use nalgebra::{DVector, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn bumps() -> BumpKernel {
    BumpKernel::new((0..101).map(|i| i as f64 / 100.0).collect(), 0.06, (0.0, 1.0)).unwrap()
}

/// Normalized correlation computed from the closed form, independent of the
/// library's oracle.
fn bump_corr(k: &BumpKernel, r: &DVector<f64>, c: f64) -> f64 {
    let f: Vec<f64> = k
        .abscissae()
        .iter()
        .map(|x| (-(x - c).powi(2) / (2.0 * k.width().powi(2))).exp())
        .collect();
    let dot: f64 = f.iter().zip(r.iter()).map(|(a, b)| a * b).sum();
    dot / f.iter().map(|a| a * a).sum::<f64>().sqrt()
}

fn golden_max(g: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    while b - a > 1e-12 {
        let c = b - phi * (b - a);
        let d = a + phi * (b - a);
        if g(c) >= g(d) {
            b = d;
        } else {
            a = c;
        }
    }
    0.5 * (a + b)
}

fn dense_argmax(g: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    (0..=n)
        .map(|i| a + (b - a) * i as f64 / n as f64)
        .max_by(|x, y| g(*x).total_cmp(&g(*y)))
        .unwrap()
}

#[test]
fn tensor_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(100);
    let h = 1e-6;
    for _ in 0..100 {
        let scheme = AcquisitionScheme::new(
            (0..30).map(|_| random_unit(&mut rng)).collect(),
            rng.random_range(500.0..3000.0),
        )
        .unwrap();
        let v = random_unit(&mut rng);
        let axial = rng.random_range(0.5..2.0);
        let radial = rng.random_range(0.05..0.9) * axial;
        let p = TensorParams::new(v, axial, radial).unwrap();
        let g = tensor_kernel_grad(&p, &scheme);
        let (e1, e2) = tangent_basis(&p.direction);
        let moved = |du: Vector3<f64>, da: f64, dr: f64| {
            tensor_kernel_eval(
                &TensorParams::new((p.direction + du).normalize(), axial + da, radial + dr).unwrap(),
                &scheme,
            )
        };
        let fd = [
            (moved(e1 * h, 0.0, 0.0) - moved(-e1 * h, 0.0, 0.0)) / (2.0 * h),
            (moved(e2 * h, 0.0, 0.0) - moved(-e2 * h, 0.0, 0.0)) / (2.0 * h),
            (moved(Vector3::zeros(), h, 0.0) - moved(Vector3::zeros(), -h, 0.0)) / (2.0 * h),
            (moved(Vector3::zeros(), 0.0, h) - moved(Vector3::zeros(), 0.0, -h)) / (2.0 * h),
        ];
        for (k, col) in fd.iter().enumerate() {
            let exact = g.column(k);
            let scale = exact.amax().max(1e-3);
            assert!((col - exact).amax() / scale < 1e-5, "column {k}");
        }
    }
}

#[test]
fn quadratic_form_by_hand_at_sixty_degrees() {
    let v = Vector3::z();
    let x = Vector3::new(60f64.to_radians().sin(), 0.0, 60f64.to_radians().cos());
    let scheme = AcquisitionScheme::new(vec![x], 1000.0).unwrap();
    let f = tensor_kernel_eval(&TensorParams::new(v, 2.0, 0.0).unwrap(), &scheme);
    assert_relative_eq!(f[0], (-0.5f64).exp(), max_relative = 1e-14);
}

#[test]
fn bump_oracle_recovers_off_grid_center() {
    let k = bumps();
    for (i, c0) in [0.3137, 0.5555, 0.7021].into_iter().enumerate() {
        let r = bump1d_eval(&Bump1dParams { center: c0 }, &k);
        let (p, corr) = bump1d_oracle(&r, &k, None, OracleConfig::default(), i as u64).unwrap();
        let g = |c: f64| bump_corr(&k, &r, c);
        let start = dense_argmax(g, 0.0, 1.0, 2000);
        let golden = golden_max(g, (start - 0.01).max(0.0), (start + 0.01).min(1.0));
        assert!((p.center - golden).abs() < 1e-6, "{} vs {golden}", p.center);
        assert!((p.center - c0).abs() < 1e-6);
        assert_relative_eq!(corr, r.norm(), max_relative = 1e-9);
    }
}

#[test]
fn bump_oracle_prefers_taller_bump() {
    let k = bumps();
    let r = bump1d_eval(&Bump1dParams { center: 0.27 }, &k) * 0.6 + bump1d_eval(&Bump1dParams { center: 0.71 }, &k);
    let (p, _) = bump1d_oracle(&r, &k, None, OracleConfig::default(), 9).unwrap();
    let best = dense_argmax(|c| bump_corr(&k, &r, c), 0.0, 1.0, 100_000);
    assert!((p.center - best).abs() < 1e-3, "{} vs {best}", p.center);
}

#[test]
fn tensor_self_match_on_simulated_scheme() {
    let scheme = AcquisitionScheme::new(make_directions(75, 2).unwrap(), 1000.0).unwrap();
    let family = TensorKernel::new(scheme.clone(), RadialMode::Free);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for s in 0..5 {
        let p = TensorParams::new(random_unit(&mut rng), rng.random_range(0.5..2.0), 0.2).unwrap();
        let r = tensor_kernel_eval(&p, &scheme);
        let (_, corr) = tensor_oracle(&r, &family, None, OracleConfig::default(), s).unwrap();
        assert!(corr >= 0.999 * r.norm());
    }
}
