//! Comparison fitters: a single diffusion tensor, NNLS on a fixed grid,
//! and first-order continuous basis pursuit.

mod cv;
mod dti;
mod focbp;
mod grid;

pub use cv::{cross_validate_c, log_grid, CvResult};
pub use dti::{dti_fit, DtiModel};
pub use focbp::{box_grid, box_vertices, focbp_build, focbp_fit, focbp_recover, FocbpDictionary};
pub use grid::{default_tensor_grid, grid_nnls_fit, grid_nnls_on, tensor_grid, DEFAULT_GRID_AXIALS};
