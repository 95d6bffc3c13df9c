//! Shared fixtures for the criterion benchmarks.

use ebp_core::simulate::{generate, SimulationConfig};
use ebp_core::AcquisitionScheme;
use nalgebra::DVector;

/// Training scheme and signal of the default simulated voxel for `seed`.
pub fn training_voxel(seed: u64) -> (AcquisitionScheme, DVector<f64>) {
    let sim = generate(&SimulationConfig {
        seed,
        ..SimulationConfig::default()
    })
    .expect("default simulation is valid");
    let signal = DVector::from_iterator(sim.train.len(), sim.train.iter().map(|&i| sim.signal[i]));
    (sim.scheme.subset(&sim.train), signal)
}
