//! Synthetic diffusion MRI voxels: crossing fascicles measured on a
//! single-shell scheme with Rician magnitude noise.

mod directions;

use nalgebra::{DVector, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::ebp::{Component, MixtureModel};
use crate::error::{Error, Result};
use crate::kernel::{tensor_kernel_eval, AcquisitionScheme, TensorParams, AXIAL_RANGE};
use crate::sphere::random_unit;

pub use directions::{covering_radius, make_directions, partition, repulsion_energy};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub n_directions: usize,
    /// s/mm^2
    pub b_value: f64,
    pub n_fascicles: usize,
    /// Variance of each Gaussian component of the Rician noise.
    pub noise_sigma2: f64,
    /// um^2/ms
    pub axial_range: (f64, f64),
    /// Weight of an optional free-water compartment (0 disables it).
    pub isotropic_weight: f64,
    /// um^2/ms
    pub isotropic_diffusivity: f64,
    /// Seed of the electrostatic direction set, shared across trials.
    pub directions_seed: u64,
    /// Seed of fascicles and noise.
    pub seed: u64,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            n_directions: 150,
            b_value: 1000.0,
            n_fascicles: 3,
            noise_sigma2: 0.005,
            axial_range: AXIAL_RANGE,
            isotropic_weight: 0.0,
            isotropic_diffusivity: 3.0,
            directions_seed: 0,
            seed: 0,
        }
    }
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if self.n_directions < 2 {
            return bad(format!("need at least 2 directions, got {}", self.n_directions));
        }
        if !(self.b_value > 0.0 && self.b_value.is_finite()) {
            return bad(format!("b-value must be positive, got {}", self.b_value));
        }
        if self.n_fascicles == 0 {
            return bad("need at least one fascicle".into());
        }
        if !(self.noise_sigma2 >= 0.0 && self.noise_sigma2.is_finite()) {
            return bad(format!("noise variance must be nonnegative, got {}", self.noise_sigma2));
        }
        let (lo, hi) = self.axial_range;
        if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
            return bad(format!("invalid axial range {:?}", self.axial_range));
        }
        if !(self.isotropic_weight >= 0.0 && self.isotropic_diffusivity >= 0.0) {
            return bad("isotropic compartment must be nonnegative".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub model: MixtureModel<TensorParams>,
    /// `(weight, diffusivity)` of the free-water compartment, if any.
    pub isotropic: Option<(f64, f64)>,
    pub clean: DVector<f64>,
}

impl GroundTruth {
    /// Noiseless signal on any scheme.
    pub fn signal_on(&self, scheme: &AcquisitionScheme) -> DVector<f64> {
        let mut s = DVector::zeros(scheme.len());
        for c in self.model.components() {
            s += tensor_kernel_eval(&c.params, scheme) * c.weight;
        }
        if let Some((w, d)) = self.isotropic {
            s.add_scalar_mut(w * (-scheme.exponent_scale() * d).exp());
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Simulation {
    pub truth: GroundTruth,
    pub signal: DVector<f64>,
    pub scheme: AcquisitionScheme,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// `|clean + eta_1 + i eta_2|` with `eta ~ N(0, sigma2)`; the draws for each
/// entry are taken in order `eta_1, eta_2`.
pub fn rician<R: Rng + ?Sized>(clean: &DVector<f64>, sigma2: f64, rng: &mut R) -> DVector<f64> {
    if sigma2 == 0.0 {
        return clean.clone();
    }
    let normal = Normal::new(0.0, sigma2.sqrt()).expect("finite positive standard deviation");
    clean.map(|c| {
        let a = c + normal.sample(rng);
        let b: f64 = normal.sample(rng);
        a.hypot(b)
    })
}

/// Full simulation including the (comparatively expensive) direction set.
pub fn generate(config: &SimulationConfig) -> Result<Simulation> {
    config.validate()?;
    let dirs = make_directions(config.n_directions, config.directions_seed)?;
    let scheme = AcquisitionScheme::new(dirs, config.b_value)?;
    let (train, test) = partition(scheme.directions());
    generate_on(config, scheme, train, test)
}

/// Simulation on a precomputed scheme and split; `config.n_directions`,
/// `b_value` and `directions_seed` are ignored.
pub fn generate_on(
    config: &SimulationConfig,
    scheme: AcquisitionScheme,
    train: Vec<usize>,
    test: Vec<usize>,
) -> Result<Simulation> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let (lo, hi) = config.axial_range;
    let components = (0..config.n_fascicles)
        .map(|_| {
            let v = random_unit(&mut rng);
            let axial = rng.random_range(lo..=hi);
            let weight = rng.random_range(0.0..1.0);
            TensorParams::new(v, axial, 0.0).map(|params| Component { weight, params })
        })
        .collect::<Result<Vec<_>>>()?;
    let isotropic =
        (config.isotropic_weight > 0.0).then_some((config.isotropic_weight, config.isotropic_diffusivity));
    let mut truth = GroundTruth {
        model: MixtureModel::new(components),
        isotropic,
        clean: DVector::zeros(0),
    };
    truth.clean = truth.signal_on(&scheme);
    let signal = rician(&truth.clean, config.noise_sigma2, &mut rng);
    Ok(Simulation {
        truth,
        signal,
        scheme,
        train,
        test,
    })
}

/// Fascicle directions of the ground truth.
pub fn fascicle_directions(truth: &GroundTruth) -> Vec<Vector3<f64>> {
    truth.model.components().iter().map(|c| c.params.direction).collect()
}
