//! Runtime checks of the convergence guarantees along a fit trace.
//!
//! With a reference model `(w*, theta*)` and `B* = 2 sum_k w*_k ||f~_k||`,
//! every refit residual satisfies `||r~||^2 <= ||r~_ref||^2 + B* rho`, and
//! each accepted step lowers the objective by at least `(alpha rho)^2`.
//! `rho` is replaced by the oracle's achieved correlation throughout.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::model::MixtureModel;
use super::trace::FitTrace;
use super::transform::TransformedProblem;
use crate::kernel::{correlation, KernelFamily};

/// Quality assumed for a stochastic oracle when checking the descent bound.
const STOCHASTIC_QUALITY: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceDiagnostics {
    pub b_star: Option<f64>,
    pub reference_objective: Option<f64>,
    /// `B* rho_hat` per trace row; absent where the row has no oracle call.
    pub gap_bound_series: Vec<Option<f64>>,
    /// Whether `||r~_m||^2 <= ||r~_ref||^2 + B* rho_hat_m` held, per row.
    pub gap_bound_holds: Vec<Option<bool>>,
    /// Objective minus the reference objective (or minus the final
    /// objective without a reference), per row.
    pub gaps: Vec<f64>,
    /// `C` in `gap_m <= C / sqrt(m)`, fitted on rows `1..`.
    pub envelope_constant: Option<f64>,
    /// Whether `obj_m - obj_{m+1} >= (alpha rho_hat_m)^2`, per accepted step.
    pub descent_bound_holds: Vec<bool>,
}

/// `2 sum_k w_k ||f~_{theta_k}||`
pub fn b_star<K: KernelFamily>(problem: &TransformedProblem<K>, reference: &MixtureModel<K::Params>) -> f64 {
    2.0 * reference
        .components()
        .iter()
        .map(|c| c.weight * problem.lift(&c.params).norm())
        .sum::<f64>()
}

/// Least-squares fit of `log gap_m = log C - log(m) / 2` over positive gaps,
/// where `gaps[i]` belongs to iteration `m = i + 1`.
pub fn envelope_constant(gaps: &[f64]) -> Option<f64> {
    let logs: Vec<f64> = gaps
        .iter()
        .enumerate()
        .filter(|(_, g)| **g > 0.0)
        .map(|(i, g)| g.ln() + 0.5 * ((i + 1) as f64).ln())
        .collect();
    if logs.is_empty() {
        return None;
    }
    Some((logs.iter().sum::<f64>() / logs.len() as f64).exp())
}

/// Largest normalized correlation of `residual` over an explicit grid, with
/// its index. A brute-force estimate of `sup_theta` used to audit oracles.
pub fn grid_correlation_max<K: KernelFamily>(
    problem: &TransformedProblem<K>,
    residual: &DVector<f64>,
    grid: &[K::Params],
) -> Option<(usize, f64)> {
    grid.iter()
        .map(|p| correlation(problem.family(), problem.augmentation(), p, residual))
        .enumerate()
        .fold(None, |best: Option<(usize, f64)>, (i, v)| match best {
            Some((_, b)) if b >= v => best,
            _ => Some((i, v)),
        })
}

pub fn diagnostics<K: KernelFamily>(
    problem: &TransformedProblem<K>,
    trace: &FitTrace,
    reference: Option<&MixtureModel<K::Params>>,
    oracle_quality: f64,
    stochastic: bool,
) -> ConvergenceDiagnostics {
    let objectives = trace.objectives();
    let b = reference.map(|r| b_star(problem, r));
    let ref_obj = reference.map(|r| problem.objective(r));
    let slack = 1e-12 * problem.target().norm_squared();

    let gap_bound_series: Vec<Option<f64>> = trace
        .records
        .iter()
        .map(|r| Some(b? * r.rho_hat?))
        .collect();
    let gap_bound_holds = trace
        .records
        .iter()
        .zip(&gap_bound_series)
        .map(|(r, bound)| Some(r.objective <= ref_obj? + (*bound)? + slack))
        .collect();

    let floor = ref_obj.unwrap_or_else(|| objectives.last().copied().unwrap_or(0.0));
    let gaps: Vec<f64> = objectives.iter().map(|o| o - floor).collect();
    let envelope = if gaps.len() == 1 {
        envelope_constant(&gaps)
    } else {
        envelope_constant(&gaps[1..])
    };

    let alpha = if stochastic {
        oracle_quality.min(STOCHASTIC_QUALITY)
    } else {
        oracle_quality
    };
    let descent_bound_holds = trace
        .records
        .windows(2)
        .map(|w| {
            let rho = w[0].rho_hat.unwrap_or(0.0);
            w[0].objective - w[1].objective >= (alpha * rho).powi(2) - slack
        })
        .collect();

    ConvergenceDiagnostics {
        b_star: b,
        reference_objective: ref_obj,
        gap_bound_series,
        gap_bound_holds,
        gaps,
        envelope_constant: envelope,
        descent_bound_holds,
    }
}
