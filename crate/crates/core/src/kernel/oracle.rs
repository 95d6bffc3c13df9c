//! Multi-start projected Newton search for the kernel most correlated with
//! a residual: `argmax_theta <r~, f~_theta> / ||f~_theta||`.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{BumpKernel, Bump1dParams, KernelFamily, SearchDomain, SmoothKernel, TensorKernel, TensorParams};
use crate::ebp::{Oracle, TransformedProblem};
use crate::error::{Error, Result};

/// Newton steps longer than this (in local coordinates) are shortened.
const MAX_STEP: f64 = 0.5;
const ARMIJO: f64 = 1e-4;
const MAX_HALVINGS: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleConfig {
    pub restarts: usize,
    pub max_newton_steps: usize,
    /// Stop a local search once the free gradient norm falls below
    /// `tol * max(1, |correlation|)`.
    pub tol: f64,
    /// Asserted quality `alpha` in `(0, 1]`: the oracle is assumed to reach
    /// `alpha * sup_theta` of the normalized correlation.
    pub quality: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            restarts: 10,
            max_newton_steps: 50,
            tol: 1e-10,
            quality: 0.95,
        }
    }
}

impl OracleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.restarts == 0 {
            return Err(Error::InvalidArgument("oracle needs at least one restart".into()));
        }
        if !(self.quality > 0.0 && self.quality <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "oracle quality must lie in (0, 1], got {}",
                self.quality
            )));
        }
        Ok(())
    }
}

/// Normalized correlation `<r~, f~_theta> / ||f~_theta||` where the lifted
/// kernel is `f_theta` with `augmentation` appended.
pub fn correlation<K: KernelFamily>(
    family: &K,
    augmentation: Option<f64>,
    params: &K::Params,
    residual: &DVector<f64>,
) -> f64 {
    let f = family.eval(params);
    let n = f.len();
    let s = augmentation.unwrap_or(0.0);
    let ra = if augmentation.is_some() { residual[n] } else { 0.0 };
    let num = residual.rows(0, n).dot(&f) + ra * s;
    let q = f.norm_squared() + s * s;
    if q <= f64::MIN_POSITIVE {
        return 0.0;
    }
    num / q.sqrt()
}

struct Local {
    value: f64,
    grad: DVector<f64>,
    hess: DMatrix<f64>,
}

fn local_model<K: SmoothKernel>(
    family: &K,
    params: &K::Params,
    r: &DVector<f64>,
    ra: f64,
    s: f64,
) -> Local {
    let d = family.local_dim();
    let f = family.eval(params);
    let q = f.norm_squared() + s * s;
    if q <= f64::MIN_POSITIVE {
        return Local {
            value: 0.0,
            grad: DVector::zeros(d),
            hess: DMatrix::zeros(d, d),
        };
    }
    let j = family.jacobian(params);
    let num = r.dot(&f) + ra * s;
    let dn = j.tr_mul(r);
    let d2n = family.weighted_hessian(params, r);
    let dq = j.tr_mul(&f) * 2.0;
    let d2q = (j.tr_mul(&j) + family.weighted_hessian(params, &f)) * 2.0;

    let q12 = q.sqrt().recip();
    let q32 = q12 / q;
    let q52 = q32 / q;
    let value = num * q12;
    let grad = &dn * q12 - &dq * (0.5 * num * q32);
    let cross = &dn * dq.transpose() + &dq * dn.transpose();
    let hess = d2n * q12 - cross * (0.5 * q32) + (&dq * dq.transpose()) * (0.75 * num * q52)
        - d2q * (0.5 * num * q32);
    Local { value, grad, hess }
}

/// Projected Newton ascent with backtracking, falling back to gradient
/// ascent when the free block of the Hessian is not negative definite.
fn ascend<K: SearchDomain>(
    family: &K,
    start: K::Params,
    r: &DVector<f64>,
    ra: f64,
    s: f64,
    cfg: &OracleConfig,
) -> (K::Params, f64) {
    let d = family.local_dim();
    let mut p = start;
    let mut m = local_model(family, &p, r, ra, s);
    if !m.value.is_finite() {
        return (p, f64::NEG_INFINITY);
    }
    for _ in 0..cfg.max_newton_steps {
        let blocked = family.blocked(&p, &m.grad);
        let free: Vec<usize> = (0..d).filter(|&k| !blocked[k]).collect();
        if free.is_empty() {
            break;
        }
        let gf = DVector::from_iterator(free.len(), free.iter().map(|&k| m.grad[k]));
        if !gf.iter().all(|v| v.is_finite()) || gf.norm() <= cfg.tol * m.value.abs().max(1.0) {
            break;
        }
        let neg_hf = DMatrix::from_fn(free.len(), free.len(), |a, b| -m.hess[(free[a], free[b])]);
        let newton = neg_hf.cholesky().map(|c| c.solve(&gf));

        let mut directions = Vec::with_capacity(2);
        if let Some(mut dir) = newton.filter(|v| v.iter().all(|x| x.is_finite())) {
            let len = dir.norm();
            if len > MAX_STEP {
                dir *= MAX_STEP / len;
            }
            directions.push(dir);
        }
        directions.push(&gf * (MAX_STEP / gf.norm()));

        let mut accepted = None;
        'dirs: for dir in directions {
            let slope = gf.dot(&dir);
            let mut t = 1.0;
            for _ in 0..MAX_HALVINGS {
                let mut step = DVector::zeros(d);
                for (a, &k) in free.iter().enumerate() {
                    step[k] = t * dir[a];
                }
                let cand = family.retract(&p, &step);
                let cm = local_model(family, &cand, r, ra, s);
                if cm.value.is_finite() && cm.value > m.value + ARMIJO * t * slope {
                    accepted = Some((cand, cm));
                    break 'dirs;
                }
                t *= 0.5;
            }
        }
        let Some((cand, cm)) = accepted else {
            break;
        };
        let gain = cm.value - m.value;
        p = cand;
        m = cm;
        if gain <= 1e-15 * m.value.abs().max(1.0) {
            break;
        }
    }
    (p, m.value)
}

/// Seeded multi-start oracle. Each call consumes the next draws of the
/// oracle's own random stream, so a fit is reproducible given the seed.
#[derive(Debug, Clone)]
pub struct NewtonOracle {
    config: OracleConfig,
    rng: ChaCha8Rng,
}

impl NewtonOracle {
    pub fn new(config: OracleConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub fn config(&self) -> &OracleConfig {
        &self.config
    }

    /// Best parameters over all restarts and their normalized correlation.
    /// Ties go to the lowest restart index.
    pub fn search<K: SearchDomain>(
        &mut self,
        family: &K,
        augmentation: Option<f64>,
        residual: &DVector<f64>,
    ) -> (K::Params, f64) {
        let n = family.len();
        let r = residual.rows(0, n).into_owned();
        let s = augmentation.unwrap_or(0.0);
        let ra = if augmentation.is_some() { residual[n] } else { 0.0 };
        let count = self.config.restarts;
        let starts: Vec<K::Params> = (0..count)
            .map(|k| family.sample_start(&mut self.rng, k, count))
            .collect();
        let mut best: Option<(K::Params, f64)> = None;
        for start in &starts {
            let (p, v) = ascend(family, start.clone(), &r, ra, s, &self.config);
            if v.is_finite() && best.as_ref().is_none_or(|(_, b)| v > *b) {
                best = Some((p, v));
            }
        }
        best.unwrap_or_else(|| {
            let p = starts[0].clone();
            let v = correlation(family, augmentation, &p, residual);
            (p, v)
        })
    }
}

impl<K: SearchDomain> Oracle<K> for NewtonOracle {
    fn propose(&mut self, problem: &TransformedProblem<K>, residual: &DVector<f64>) -> Option<K::Params> {
        let (p, v) = self.search(problem.family(), problem.augmentation(), residual);
        v.is_finite().then_some(p)
    }

    fn quality(&self) -> f64 {
        self.config.quality
    }

    fn is_stochastic(&self) -> bool {
        true
    }
}

/// One-shot tensor oracle on an (optionally augmented) residual.
pub fn tensor_oracle(
    residual: &DVector<f64>,
    kernel: &TensorKernel,
    augmentation: Option<f64>,
    config: OracleConfig,
    seed: u64,
) -> Result<(TensorParams, f64)> {
    check_residual(residual, kernel.len(), augmentation)?;
    Ok(NewtonOracle::new(config, seed)?.search(kernel, augmentation, residual))
}

/// One-shot bump oracle on an (optionally augmented) residual.
pub fn bump1d_oracle(
    residual: &DVector<f64>,
    kernel: &BumpKernel,
    augmentation: Option<f64>,
    config: OracleConfig,
    seed: u64,
) -> Result<(Bump1dParams, f64)> {
    check_residual(residual, kernel.len(), augmentation)?;
    Ok(NewtonOracle::new(config, seed)?.search(kernel, augmentation, residual))
}

fn check_residual(residual: &DVector<f64>, n: usize, augmentation: Option<f64>) -> Result<()> {
    let expected = n + usize::from(augmentation.is_some());
    if residual.len() != expected {
        return Err(Error::Dimension(format!(
            "residual has length {}, expected {expected}",
            residual.len()
        )));
    }
    if residual.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("residual"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{AcquisitionScheme, RadialMode};
    use crate::sphere::random_unit;
    use nalgebra::Vector3;

    fn scheme(n: usize, seed: u64) -> AcquisitionScheme {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        AcquisitionScheme::new((0..n).map(|_| random_unit(&mut rng)).collect(), 1000.0).unwrap()
    }

    #[test]
    fn local_model_matches_finite_differences() {
        let k = TensorKernel::new(scheme(40, 1), RadialMode::Free);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let r = DVector::from_fn(40, |_, _| rand::Rng::random_range(&mut rng, -1.0..1.0));
        let p = TensorParams::new(Vector3::new(0.3, -0.2, 0.9), 1.4, 0.3).unwrap();
        let s = 0.7;
        let ra = 0.4;
        let m = local_model(&k, &p, &r, ra, s);
        let h = 1e-5;
        for a in 0..4 {
            let mut e = DVector::zeros(4);
            e[a] = h;
            let plus = local_model(&k, &k.retract(&p, &e), &r, ra, s);
            let minus = local_model(&k, &k.retract(&p, &(-e)), &r, ra, s);
            let fd = (plus.value - minus.value) / (2.0 * h);
            assert!((fd - m.grad[a]).abs() < 1e-6 * (1.0 + fd.abs()), "grad {a}: {fd} vs {}", m.grad[a]);
        }
        // second differences of the value in the fixed chart at p
        let value = |u: &DVector<f64>| local_model(&k, &k.retract(&p, u), &r, ra, s).value;
        let h = 1e-4;
        for a in 0..4 {
            for b in 0..4 {
                let mut ea = DVector::zeros(4);
                ea[a] = h;
                let mut eb = DVector::zeros(4);
                eb[b] = h;
                let fd2 = (value(&(&ea + &eb)) - value(&(&ea - &eb)) - value(&(&eb - &ea))
                    + value(&(-&ea - &eb)))
                    / (4.0 * h * h);
                assert!(
                    (fd2 - m.hess[(a, b)]).abs() < 1e-4 * (1.0 + fd2.abs()),
                    "hess {a},{b}: {fd2} vs {}",
                    m.hess[(a, b)]
                );
            }
        }
    }

    #[test]
    fn self_match_recovers_kernel() {
        let k = TensorKernel::new(scheme(75, 4), RadialMode::Free);
        let truth = TensorParams::new(Vector3::new(0.1, 0.7, 0.3), 1.6, 0.1).unwrap();
        let r = k.eval(&truth);
        let (_, v) = tensor_oracle(&r, &k, None, OracleConfig::default(), 9).unwrap();
        assert!(v >= 0.999 * r.norm());
    }

    #[test]
    fn anticorrelated_residual_gives_nonpositive() {
        let k = TensorKernel::new(scheme(60, 5), RadialMode::Free);
        let truth = TensorParams::new(Vector3::z(), 1.0, 0.0).unwrap();
        let r = -k.eval(&truth);
        let (_, v) = tensor_oracle(&r, &k, None, OracleConfig::default(), 1).unwrap();
        assert!(v <= 0.0);
    }

    #[test]
    fn bump_oracle_zero_residual() {
        let k = BumpKernel::new((0..50).map(|i| i as f64 / 49.0).collect(), 0.05, (0.0, 1.0)).unwrap();
        let (p, v) = bump1d_oracle(&DVector::zeros(50), &k, None, OracleConfig::default(), 0).unwrap();
        assert_eq!(v, 0.0);
        assert!(k.is_valid(&p));
    }

    #[test]
    fn oracle_is_deterministic_given_seed() {
        let k = TensorKernel::new(scheme(30, 6), RadialMode::Free);
        let r = DVector::from_fn(30, |i, _| (i as f64 * 0.37).sin());
        let a = tensor_oracle(&r, &k, None, OracleConfig::default(), 77).unwrap();
        let b = tensor_oracle(&r, &k, None, OracleConfig::default(), 77).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_bad_residuals() {
        let k = TensorKernel::new(scheme(10, 7), RadialMode::Free);
        assert!(tensor_oracle(&DVector::zeros(9), &k, None, OracleConfig::default(), 0).is_err());
        let mut r = DVector::zeros(10);
        r[0] = f64::NAN;
        assert!(tensor_oracle(&r, &k, None, OracleConfig::default(), 0).is_err());
    }
}
