use nalgebra::{DVector, Vector3};

use crate::ebp::{prune, transform, MixtureModel, RegularizationSpec, TransformedProblem};
use crate::error::{Error, Result};
use crate::kernel::{KernelFamily, TensorParams};
use crate::nnls::{nnls_solve, NnlsProblem};
use crate::sphere::{geodesic_sphere, unique_axes};

/// Axial diffusivities of the default tensor grid, um^2/ms.
pub const DEFAULT_GRID_AXIALS: [f64; 4] = [0.5, 1.0, 1.5, 2.0];

/// Stick tensors (radial 0) over the distinct axes of a geodesic sphere of
/// the given frequency times `axials`. Frequency 6 gives the 362-vertex
/// tessellation, i.e. 181 axes.
pub fn tensor_grid(frequency: usize, axials: &[f64]) -> Vec<TensorParams> {
    let axes: Vec<Vector3<f64>> = unique_axes(&geodesic_sphere(frequency));
    axes.iter()
        .flat_map(|v| {
            axials
                .iter()
                .map(move |&a| TensorParams::new(*v, a, 0.0).expect("grid parameters are valid"))
        })
        .collect()
}

pub fn default_tensor_grid() -> Vec<TensorParams> {
    tensor_grid(6, &DEFAULT_GRID_AXIALS)
}

/// NNLS over the lifted grid dictionary, pruned to positive weights.
pub fn grid_nnls_fit<K: KernelFamily>(
    family: K,
    signal: &DVector<f64>,
    grid: &[K::Params],
    reg: RegularizationSpec,
) -> Result<MixtureModel<K::Params>> {
    let problem = transform(signal.clone(), family, reg)?;
    grid_nnls_on(&problem, grid)
}

pub fn grid_nnls_on<K: KernelFamily>(
    problem: &TransformedProblem<K>,
    grid: &[K::Params],
) -> Result<MixtureModel<K::Params>> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("grid is empty".into()));
    }
    let nnls = NnlsProblem::new(problem.design(grid), problem.target().clone())?;
    let sol = match nnls_solve(&nnls) {
        Ok(s) => s,
        Err(Error::IterationCap { best, .. }) => *best,
        Err(e) => return Err(e),
    };
    Ok(prune(
        &MixtureModel::from_parts(sol.coefficients.as_slice(), grid),
        0.0,
    ))
}
