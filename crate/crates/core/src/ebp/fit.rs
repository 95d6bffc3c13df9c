use std::time::Instant;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::model::{prune, MixtureModel};
use super::trace::{FitTrace, StopReason, TraceRecord};
use super::transform::TransformedProblem;
use super::Oracle;
use crate::error::{Error, Result};
use crate::kernel::{correlation, KernelFamily};
use crate::nnls::{nnls_solve_warm, NnlsProblem, NnlsSolution};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StopConfig {
    pub max_iterations: usize,
    /// Only takes effect when validation data is supplied.
    pub early_stopping: bool,
    pub patience: usize,
    pub weight_floor: f64,
    /// Overrides the default dual tolerance `1e-10 * ||f~_new|| * ||y~||`.
    pub dual_tolerance: Option<f64>,
    /// Fill `wall_ms` in the trace. Off by default so traces are reproducible.
    pub record_timing: bool,
}

impl Default for StopConfig {
    fn default() -> Self {
        Self {
            max_iterations: 50,
            early_stopping: true,
            patience: 5,
            weight_floor: 0.0,
            dual_tolerance: None,
            record_timing: false,
        }
    }
}

impl StopConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::InvalidArgument("max_iterations must be at least 1".into()));
        }
        if !(self.weight_floor >= 0.0 && self.weight_floor.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "weight floor must be nonnegative, got {}",
                self.weight_floor
            )));
        }
        if let Some(t) = self.dual_tolerance {
            if !(t > 0.0 && t.is_finite()) {
                return Err(Error::InvalidArgument(format!("dual tolerance must be positive, got {t}")));
            }
        }
        Ok(())
    }
}

/// Held-out measurements: the same kernel family bound to other points.
#[derive(Debug, Clone)]
pub struct Validation<K> {
    pub family: K,
    pub signal: DVector<f64>,
}

impl<K: KernelFamily> Validation<K> {
    pub fn mse(&self, model: &MixtureModel<K::Params>) -> f64 {
        (&self.signal - model.predict(&self.family)).norm_squared() / self.signal.len() as f64
    }
}

/// NNLS fit over a fixed dictionary, pruned to its positive weights.
pub fn initialize<K: KernelFamily>(
    problem: &TransformedProblem<K>,
    seed_dictionary: &[K::Params],
) -> Result<(MixtureModel<K::Params>, DVector<f64>)> {
    if seed_dictionary.is_empty() {
        return Err(Error::InvalidArgument("seed dictionary is empty".into()));
    }
    let model = refit(problem, seed_dictionary.to_vec(), &[], 0.0)?;
    let residual = problem.residual(&model);
    Ok((model, residual))
}

fn refit<K: KernelFamily>(
    problem: &TransformedProblem<K>,
    params: Vec<K::Params>,
    warm: &[usize],
    weight_floor: f64,
) -> Result<MixtureModel<K::Params>> {
    let nnls = NnlsProblem::new(problem.design(&params), problem.target().clone())?;
    let sol = match nnls_solve_warm(&nnls, warm) {
        Ok(s) => s,
        Err(Error::IterationCap { best, .. }) => {
            log::warn!("NNLS refit hit its iteration cap; using best iterate");
            *best
        }
        Err(e) => return Err(e),
    };
    Ok(prune(&to_model(&sol, &params), weight_floor))
}

fn to_model<P: Clone>(sol: &NnlsSolution, params: &[P]) -> MixtureModel<P> {
    MixtureModel::from_parts(sol.coefficients.as_slice(), params)
}

fn max_active_correlation<K: KernelFamily>(
    problem: &TransformedProblem<K>,
    model: &MixtureModel<K::Params>,
    residual: &DVector<f64>,
) -> f64 {
    let rn = residual.norm();
    if rn == 0.0 {
        return 0.0;
    }
    model
        .components()
        .iter()
        .map(|c| {
            let f = problem.lift(&c.params);
            let fn_ = f.norm();
            if fn_ == 0.0 {
                0.0
            } else {
                (residual.dot(&f) / (rn * fn_)).abs()
            }
        })
        .fold(0.0, f64::max)
}

/// Single-row trace describing `model` without running any iterations.
pub fn initial_trace<K: KernelFamily>(
    problem: &TransformedProblem<K>,
    model: &MixtureModel<K::Params>,
    stop_reason: StopReason,
) -> FitTrace {
    let residual = problem.residual(model);
    let objective = residual.norm_squared();
    FitTrace {
        records: vec![TraceRecord {
            iteration: 0,
            active_size: model.len(),
            objective,
            train_mse: objective / problem.transformed_len() as f64,
            valid_mse: None,
            rho_hat: None,
            max_active_correlation: max_active_correlation(problem, model, &residual),
            wall_ms: None,
        }],
        stop_reason,
        selected: 0,
    }
}

/// Runs the grow/refit/prune loop from `initial` (typically the output of
/// [`initialize`], or an empty model).
///
/// Every accepted step lowers or keeps the transformed objective; a refit
/// that would raise it is discarded and the loop stops as `Stalled`.
pub fn ebp_fit<K, O>(
    problem: &TransformedProblem<K>,
    initial: MixtureModel<K::Params>,
    oracle: &mut O,
    validation: Option<&Validation<K>>,
    stop: &StopConfig,
) -> Result<(MixtureModel<K::Params>, FitTrace)>
where
    K: KernelFamily,
    O: Oracle<K>,
{
    stop.validate()?;
    if let Some(v) = validation {
        if v.signal.len() != v.family.len() {
            return Err(Error::Dimension("validation signal and family differ in length".into()));
        }
    }
    let started = Instant::now();
    let n_tilde = problem.transformed_len() as f64;
    let target_norm = problem.target().norm();
    let family = problem.family();

    let mut model = initial;
    let mut residual = problem.residual(&model);
    let mut objective = residual.norm_squared();

    let record = |iteration: usize, model: &MixtureModel<K::Params>, residual: &DVector<f64>, objective: f64| {
        TraceRecord {
            iteration,
            active_size: model.len(),
            objective,
            train_mse: objective / n_tilde,
            valid_mse: validation.map(|v| v.mse(model)),
            rho_hat: None,
            max_active_correlation: max_active_correlation(problem, model, residual),
            wall_ms: stop
                .record_timing
                .then(|| started.elapsed().as_secs_f64() * 1e3),
        }
    };

    let mut records = vec![record(0, &model, &residual, objective)];
    let mut best = (records[0].valid_mse.unwrap_or(f64::INFINITY), 0usize, model.clone());
    let early = stop.early_stopping && validation.is_some();
    let mut reason = StopReason::MaxIterations;

    for m in 1..=stop.max_iterations {
        let Some(theta) = oracle.propose(problem, &residual).filter(|p| family.is_valid(p)) else {
            reason = StopReason::OracleFailure;
            break;
        };
        let rho = correlation(family, problem.augmentation(), &theta, &residual);
        records.last_mut().expect("trace has a row").rho_hat = Some(rho);

        let eps = stop.dual_tolerance.unwrap_or_else(|| {
            let t = 1e-10 * problem.lift(&theta).norm() * target_norm;
            if t > 0.0 {
                t
            } else {
                1e-10
            }
        });
        if !rho.is_finite() || rho <= eps * residual.norm().max(1.0) {
            reason = StopReason::Converged;
            break;
        }

        let active = model.params();
        let warm: Vec<usize> = (0..active.len()).collect();
        let tol = family.duplicate_tolerance();
        let duplicate = active
            .iter()
            .position(|p| family.param_distance(p, &theta) <= tol);

        let mut next = None;
        if let Some(j) = duplicate {
            let mut replaced = active.clone();
            replaced[j] = theta.clone();
            let cand = refit(problem, replaced, &warm, stop.weight_floor)?;
            let obj = problem.objective(&cand);
            if obj <= objective {
                next = Some((cand, obj));
            }
        }
        if next.is_none() {
            let mut grown = active;
            grown.push(theta);
            let cand = refit(problem, grown, &warm, stop.weight_floor)?;
            let obj = problem.objective(&cand);
            if obj < objective {
                next = Some((cand, obj));
            }
        }
        let Some((cand, obj)) = next else {
            reason = StopReason::Stalled;
            break;
        };
        model = cand;
        objective = obj;
        residual = problem.residual(&model);
        let row = record(m, &model, &residual, objective);
        log::debug!(
            "ebp iteration {m}: K = {}, objective = {objective:.6e}, rho = {rho:.3e}",
            row.active_size
        );
        if let Some(v) = row.valid_mse {
            if v < best.0 {
                best = (v, m, model.clone());
            }
        }
        records.push(row);
        if early && m - best.1 >= stop.patience {
            reason = StopReason::EarlyStopped;
            break;
        }
    }

    let (returned, selected) = if early {
        (best.2, best.1)
    } else {
        let last = records.len() - 1;
        (model, last)
    };
    Ok((
        returned,
        FitTrace {
            records,
            stop_reason: reason,
            selected,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ebp::{transform, Component, RegularizationSpec};
    use crate::kernel::{Bump1dParams, BumpKernel, NewtonOracle, OracleConfig};

    fn bumps() -> BumpKernel {
        BumpKernel::new((0..60).map(|i| i as f64 / 59.0).collect(), 0.08, (0.0, 1.0)).unwrap()
    }

    #[test]
    fn zero_signal_exits_immediately() {
        let p = transform(DVector::zeros(60), bumps(), RegularizationSpec::none()).unwrap();
        let mut o = NewtonOracle::new(OracleConfig::default(), 0).unwrap();
        let (m, t) = ebp_fit(&p, MixtureModel::default(), &mut o, None, &StopConfig::default()).unwrap();
        assert!(m.is_empty());
        assert_eq!(t.stop_reason, StopReason::Converged);
        assert_eq!(t.records.len(), 1);
        assert_eq!(t.records[0].objective, 0.0);
    }

    #[test]
    fn single_bump_is_recovered_quickly() {
        let k = bumps();
        let truth = Bump1dParams { center: 0.4321 };
        let y = k.eval(&truth) * 0.8;
        let p = transform(y.clone(), k, RegularizationSpec::none()).unwrap();
        let mut o = NewtonOracle::new(OracleConfig::default(), 3).unwrap();
        let (m, t) = ebp_fit(&p, MixtureModel::default(), &mut o, None, &StopConfig::default()).unwrap();
        assert_eq!(m.len(), 1);
        assert!(t.iterations() <= 3);
        assert!(p.objective(&m) < 1e-10 * y.norm_squared());
        assert!((m.components()[0].params.center - truth.center).abs() < 1e-6);
    }

    #[test]
    fn orthogonal_dictionary_initializes_empty() {
        let k = BumpKernel::new(vec![0.0, 1e6], 1.0, (0.0, 1e6)).unwrap();
        let p = transform(DVector::from_vec(vec![0.0, 1.0]), k, RegularizationSpec::none()).unwrap();
        let (m, r) = initialize(&p, &[Bump1dParams { center: 0.0 }]).unwrap();
        assert!(m.is_empty());
        assert_eq!(r, DVector::from_vec(vec![0.0, 1.0]));
        assert!(initialize(&p, &[]).is_err());
    }

    #[test]
    fn exact_dictionary_leaves_nothing_to_add() {
        let k = bumps();
        let truth = Bump1dParams { center: 0.5 };
        let p = transform(k.eval(&truth), k, RegularizationSpec::none()).unwrap();
        let (m, _) = initialize(&p, &[Bump1dParams { center: 0.1 }, truth, Bump1dParams { center: 0.9 }]).unwrap();
        assert_eq!(m.len(), 1);
        let Component { weight, params } = m.components()[0];
        assert!((weight - 1.0).abs() < 1e-12);
        assert_eq!(params, truth);
        let mut o = NewtonOracle::new(OracleConfig::default(), 0).unwrap();
        let (fit, t) = ebp_fit(&p, m.clone(), &mut o, None, &StopConfig::default()).unwrap();
        assert_eq!(t.iterations(), 0);
        assert_eq!(fit, m);
    }
}
