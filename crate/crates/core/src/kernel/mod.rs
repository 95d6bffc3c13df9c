//! Kernel families `theta -> f_theta` evaluated on a fixed set of
//! measurement points, and the multi-start Newton oracle that searches them.

mod bump;
mod oracle;
mod tensor;

use std::fmt::Debug;

use nalgebra::{DMatrix, DVector};
use rand::Rng;

pub use bump::{bump1d_eval, Bump1dParams, BumpKernel};
pub use oracle::{bump1d_oracle, correlation, tensor_oracle, NewtonOracle, OracleConfig};
pub use tensor::{
    tensor_kernel_eval, tensor_kernel_grad, AcquisitionScheme, RadialMode, TensorKernel,
    TensorParams, AXIAL_RANGE,
};

/// A parametric kernel family bound to the measurement points it is
/// evaluated on.
pub trait KernelFamily {
    type Params: Clone + Debug + PartialEq + Send + Sync;

    /// Number of measurement points.
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn eval(&self, params: &Self::Params) -> DVector<f64>;

    /// Whether `params` is finite and inside the parameter space.
    fn is_valid(&self, params: &Self::Params) -> bool;

    /// Distance used to detect near-duplicate parameters.
    fn param_distance(&self, a: &Self::Params, b: &Self::Params) -> f64;

    /// Parameters closer than this are treated as the same kernel.
    fn duplicate_tolerance(&self) -> f64;
}

/// Kernel family with first and second derivatives in local coordinates
/// around each parameter value.
pub trait SmoothKernel: KernelFamily {
    fn local_dim(&self) -> usize;

    /// `n x d` matrix of `d f_i / d u_k` at `params`.
    fn jacobian(&self, params: &Self::Params) -> DMatrix<f64>;

    /// `sum_i weights_i * Hess(f_i)` at `params`, `d x d`.
    fn weighted_hessian(&self, params: &Self::Params, weights: &DVector<f64>) -> DMatrix<f64>;
}

/// The constraint geometry the oracle's local search works in.
pub trait SearchDomain: SmoothKernel {
    /// Starting point for restart `index` out of `count`.
    fn sample_start<R: Rng + ?Sized>(&self, rng: &mut R, index: usize, count: usize) -> Self::Params;

    /// Moves `params` by `step` in local coordinates and projects back onto
    /// the parameter space.
    fn retract(&self, params: &Self::Params, step: &DVector<f64>) -> Self::Params;

    /// Coordinates pinned at a bound with the gradient pointing outward.
    fn blocked(&self, params: &Self::Params, gradient: &DVector<f64>) -> Vec<bool>;
}

/// Kernel family whose parameters live in a box of `R^D`, as needed by
/// first-order continuous basis pursuit.
pub trait EuclideanKernel: KernelFamily {
    fn dim(&self) -> usize;
    fn to_coords(&self, params: &Self::Params) -> Vec<f64>;
    fn from_coords(&self, coords: &[f64]) -> Self::Params;
    /// `n x D` derivative matrix, or `None` if the family has no gradient.
    fn coord_jacobian(&self, params: &Self::Params) -> Option<DMatrix<f64>>;
}
