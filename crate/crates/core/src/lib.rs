//! Elastic basis pursuit for nonparametric mixture models.
//!
//! A signal `y` is modelled as `sum_k w_k f_{theta_k}` with `w >= 0` and
//! kernels drawn from a continuous family. [`ebp`] grows the set of
//! `theta` with an oracle and refits all weights by [`nnls`] after every
//! addition. [`baselines`] holds the grid, tensor and first-order CBP
//! comparisons, [`simulate`] the diffusion MRI test bed and [`metrics`] the
//! prediction and fODF error measures.

pub mod baselines;
pub mod ebp;
pub mod error;
pub mod io;
pub mod kernel;
pub mod linalg;
pub mod methods;
pub mod metrics;
pub mod nnls;
pub mod simulate;
pub mod sphere;

pub use ebp::{
    ebp_fit, initialize, prune, transform, Component, FitTrace, MixtureModel, Oracle,
    RegularizationKind, RegularizationSpec, StopConfig, StopReason, TransformedProblem, Validation,
};
pub use error::{Error, Result};
pub use kernel::{
    AcquisitionScheme, Bump1dParams, BumpKernel, KernelFamily, NewtonOracle, OracleConfig,
    RadialMode, TensorKernel, TensorParams,
};
pub use nnls::{nnls_solve, nnls_solve_warm, NnlsProblem, NnlsSolution};
