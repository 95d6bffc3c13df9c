//! Elastic basis pursuit: grow the active set with an oracle, refit all
//! weights by NNLS, prune zeros, repeat.

mod diagnostics;
mod fit;
mod model;
mod trace;
mod transform;

use nalgebra::DVector;

use crate::kernel::KernelFamily;

pub use diagnostics::{
    b_star, diagnostics, envelope_constant, grid_correlation_max, ConvergenceDiagnostics,
};
pub use fit::{ebp_fit, initial_trace, initialize, StopConfig, Validation};
pub use model::{prune, Component, MixtureModel};
pub use trace::{FitTrace, StopReason, TraceRecord, TRACE_HEADER};
pub use transform::{transform, RegularizationKind, RegularizationSpec, TransformedProblem};

/// Returns a parameter whose lifted kernel correlates well with a residual.
///
/// The asserted `quality` is the `alpha` of the contract
/// `corr(propose(r)) >= alpha * sup_theta corr(theta)`; it is not checked.
pub trait Oracle<K: KernelFamily> {
    fn propose(&mut self, problem: &TransformedProblem<K>, residual: &DVector<f64>) -> Option<K::Params>;

    fn quality(&self) -> f64;

    fn is_stochastic(&self) -> bool;
}
