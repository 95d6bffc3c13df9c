//! End-to-end fitting of a diffusion voxel with any of the four methods,
//! shared by the command-line tool and the benchmarks.

use std::f64::consts::{FRAC_PI_2, PI};
use std::sync::OnceLock;
use std::time::Instant;

use nalgebra::{DVector, Vector3};
use serde::{Deserialize, Serialize};

use crate::baselines::{
    box_grid, cross_validate_c, dti_fit, focbp_build, focbp_fit, grid_nnls_on, log_grid, tensor_grid,
    CvResult, DtiModel, DEFAULT_GRID_AXIALS,
};
use crate::ebp::{
    ebp_fit, initial_trace, initialize, transform, FitTrace, MixtureModel, RegularizationSpec, StopConfig,
    StopReason, TransformedProblem, Validation,
};
use crate::error::{Error, Result};
use crate::kernel::{AcquisitionScheme, NewtonOracle, OracleConfig, RadialMode, TensorKernel, TensorParams};
use crate::metrics::{DiffusionModel, DiscreteFodf};
use crate::simulate::make_directions;

/// Axial diffusivity of the initialization dictionary, um^2/ms.
pub const SEED_AXIAL: f64 = 1.25;
pub const SEED_DIRECTIONS: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Ebp,
    Nnls,
    Dti,
    Cbp,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Ebp, Method::Nnls, Method::Dti, Method::Cbp];

    pub fn name(self) -> &'static str {
        match self {
            Method::Ebp => "ebp",
            Method::Nnls => "nnls",
            Method::Dti => "dti",
            Method::Cbp => "cbp",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown method {s:?} (expected ebp, nnls, dti or cbp)")))
    }
}

/// How the number of EBP iterations is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum EbpStopping {
    /// Run until convergence or `max_iterations`.
    Fixed,
    /// Average the validation curves of a k-fold split of the training
    /// directions, then refit on all of them for the best iteration count.
    CrossValidated { folds: usize },
    /// Hold out every `every`-th training direction and return the model
    /// with the lowest held-out error (patience 5).
    Holdout { every: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MethodConfig {
    pub lambda: f64,
    /// Volume-anchor target; cross-validated when absent.
    pub c: Option<f64>,
    pub cv_folds: usize,
    pub cv_grid: (f64, f64, usize),
    pub restarts: usize,
    /// Geodesic frequency of the NNLS direction grid, and polar cell count
    /// of the CBP grid.
    pub grid_size: usize,
    pub max_iterations: usize,
    pub stopping: EbpStopping,
    pub radial: RadialMode,
    /// Size of the EBP initialization dictionary; 0 starts from the empty
    /// model.
    pub init_directions: usize,
    pub seed: u64,
    pub timing: bool,
}

impl Default for MethodConfig {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            c: None,
            cv_folds: 5,
            cv_grid: (0.1, 10.0, 8),
            restarts: 10,
            grid_size: 6,
            max_iterations: 50,
            stopping: EbpStopping::CrossValidated { folds: 5 },
            radial: RadialMode::Zero,
            init_directions: SEED_DIRECTIONS,
            seed: 0,
            timing: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Fitted {
    Mixture(MixtureModel<TensorParams>),
    Dti(DtiModel),
}

impl Fitted {
    pub fn components(&self) -> usize {
        match self {
            Fitted::Mixture(m) => m.len(),
            Fitted::Dti(_) => 1,
        }
    }
}

impl DiffusionModel for Fitted {
    fn predict(&self, scheme: &AcquisitionScheme) -> DVector<f64> {
        match self {
            Fitted::Mixture(m) => DiffusionModel::predict(m, scheme),
            Fitted::Dti(d) => DiffusionModel::predict(d, scheme),
        }
    }

    fn fodf(&self) -> DiscreteFodf {
        match self {
            Fitted::Mixture(m) => m.fodf(),
            Fitted::Dti(d) => d.fodf(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct FitOutput {
    pub model: Fitted,
    pub trace: Option<FitTrace>,
    pub cv: Option<CvResult>,
    pub regularization: Option<RegularizationSpec>,
    /// Oracle/refit rounds of the returned EBP model.
    pub iterations: usize,
    pub wall_ms: f64,
}

/// Initialization dictionary: sticks of axial diffusivity 1.25 along an
/// electrostatic direction set. Empty for `count < 2`.
pub fn seed_dictionary(count: usize) -> Vec<TensorParams> {
    static DEFAULT: OnceLock<Vec<TensorParams>> = OnceLock::new();
    let build = |n: usize| -> Vec<TensorParams> {
        make_directions(n, 0)
            .expect("valid direction count")
            .into_iter()
            .map(|v| TensorParams::new(v, SEED_AXIAL, 0.0).expect("valid seed parameters"))
            .collect()
    };
    match count {
        0 | 1 => Vec::new(),
        SEED_DIRECTIONS => DEFAULT.get_or_init(|| build(SEED_DIRECTIONS)).clone(),
        n => build(n),
    }
}

/// Fits `signal`, measured on `scheme`, with `method`.
pub fn fit_voxel(
    method: Method,
    scheme: &AcquisitionScheme,
    signal: &DVector<f64>,
    cfg: &MethodConfig,
) -> Result<FitOutput> {
    if signal.len() != scheme.len() {
        return Err(Error::Dimension("signal and scheme differ in length".into()));
    }
    let started = Instant::now();
    let mut out = match method {
        Method::Dti => FitOutput {
            model: Fitted::Dti(dti_fit(scheme, signal)?),
            trace: None,
            cv: None,
            regularization: None,
            iterations: 0,
            wall_ms: 0.0,
        },
        Method::Nnls => {
            let (reg, cv) = regularization(scheme, signal, cfg)?;
            let grid = tensor_grid(cfg.grid_size, &DEFAULT_GRID_AXIALS);
            let problem = transform(signal.clone(), TensorKernel::new(scheme.clone(), RadialMode::Zero), reg)?;
            FitOutput {
                model: Fitted::Mixture(grid_nnls_on(&problem, &grid)?),
                trace: None,
                cv,
                regularization: Some(reg),
                iterations: 0,
                wall_ms: 0.0,
            }
        }
        Method::Cbp => {
            let (reg, cv) = regularization(scheme, signal, cfg)?;
            let family = TensorKernel::new(scheme.clone(), RadialMode::Zero);
            let f = cfg.grid_size.max(1);
            let (centers, half) = box_grid(
                &[(0.0, FRAC_PI_2), (-PI, PI), (DEFAULT_GRID_AXIALS[0], DEFAULT_GRID_AXIALS[3])],
                &[f, 4 * f, 2],
            )?;
            let dict = focbp_build(&family, &centers, &half)?;
            FitOutput {
                model: Fitted::Mixture(focbp_fit(&family, &dict, signal, reg)?),
                trace: None,
                cv,
                regularization: Some(reg),
                iterations: 0,
                wall_ms: 0.0,
            }
        }
        Method::Ebp => {
            let (reg, cv) = regularization(scheme, signal, cfg)?;
            let (model, trace) = fit_ebp(scheme, signal, reg, cfg)?;
            FitOutput {
                iterations: trace.records[trace.selected].iteration,
                model: Fitted::Mixture(model),
                trace: Some(trace),
                cv,
                regularization: Some(reg),
                wall_ms: 0.0,
            }
        }
    };
    out.wall_ms = started.elapsed().as_secs_f64() * 1e3;
    Ok(out)
}

fn regularization(
    scheme: &AcquisitionScheme,
    signal: &DVector<f64>,
    cfg: &MethodConfig,
) -> Result<(RegularizationSpec, Option<CvResult>)> {
    if let Some(c) = cfg.c {
        return Ok((RegularizationSpec::volume_anchor(cfg.lambda, c), None));
    }
    let (lo, hi, count) = cfg.cv_grid;
    let grid = tensor_grid(cfg.grid_size, &DEFAULT_GRID_AXIALS);
    let cv = cross_validate_c(
        |idx: &[usize]| TensorKernel::new(scheme.subset(idx), RadialMode::Zero),
        signal,
        &grid,
        cfg.lambda,
        &log_grid(lo, hi, count),
        cfg.cv_folds,
    )?;
    Ok((RegularizationSpec::volume_anchor(cfg.lambda, cv.best_c), Some(cv)))
}

fn oracle(cfg: &MethodConfig, stream: u64) -> Result<NewtonOracle> {
    NewtonOracle::new(
        OracleConfig {
            restarts: cfg.restarts,
            ..OracleConfig::default()
        },
        cfg.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(stream),
    )
}

fn ebp_problem(
    scheme: &AcquisitionScheme,
    signal: &DVector<f64>,
    reg: RegularizationSpec,
    cfg: &MethodConfig,
) -> Result<(TransformedProblem<TensorKernel>, MixtureModel<TensorParams>)> {
    let problem = transform(signal.clone(), TensorKernel::new(scheme.clone(), cfg.radial), reg)?;
    let dict = seed_dictionary(cfg.init_directions);
    let init = if dict.is_empty() {
        MixtureModel::default()
    } else {
        initialize(&problem, &dict)?.0
    };
    Ok((problem, init))
}

fn fit_ebp(
    scheme: &AcquisitionScheme,
    signal: &DVector<f64>,
    reg: RegularizationSpec,
    cfg: &MethodConfig,
) -> Result<(MixtureModel<TensorParams>, FitTrace)> {
    let stop = StopConfig {
        max_iterations: cfg.max_iterations,
        early_stopping: false,
        record_timing: cfg.timing,
        ..StopConfig::default()
    };
    match cfg.stopping {
        EbpStopping::Fixed => {
            let (problem, init) = ebp_problem(scheme, signal, reg, cfg)?;
            ebp_fit(&problem, init, &mut oracle(cfg, 0)?, None, &stop)
        }
        EbpStopping::Holdout { every } => {
            if every < 2 {
                return Err(Error::InvalidArgument("holdout stride must be at least 2".into()));
            }
            let (held, kept): (Vec<usize>, Vec<usize>) = (0..scheme.len()).partition(|i| i % every == every - 1);
            let (problem, init) = ebp_problem(&scheme.subset(&kept), &pick(signal, &kept), reg, cfg)?;
            let validation = Validation {
                family: TensorKernel::new(scheme.subset(&held), cfg.radial),
                signal: pick(signal, &held),
            };
            let stop = StopConfig {
                early_stopping: true,
                ..stop
            };
            ebp_fit(&problem, init, &mut oracle(cfg, 0)?, Some(&validation), &stop)
        }
        EbpStopping::CrossValidated { folds } => {
            let n = scheme.len();
            if folds < 2 || folds > n {
                return Err(Error::InvalidArgument(format!("need 2 <= folds <= {n}, got {folds}")));
            }
            let mut curve = vec![0.0; cfg.max_iterations + 1];
            for k in 0..folds {
                let (held, kept): (Vec<usize>, Vec<usize>) = (0..n).partition(|i| i % folds == k);
                let (problem, init) = ebp_problem(&scheme.subset(&kept), &pick(signal, &kept), reg, cfg)?;
                let validation = Validation {
                    family: TensorKernel::new(scheme.subset(&held), cfg.radial),
                    signal: pick(signal, &held),
                };
                let (_, trace) = ebp_fit(&problem, init, &mut oracle(cfg, 1 + k as u64)?, Some(&validation), &stop)?;
                let sse: Vec<f64> = trace
                    .records
                    .iter()
                    .map(|r| r.valid_mse.expect("validation supplied") * held.len() as f64)
                    .collect();
                for (m, c) in curve.iter_mut().enumerate() {
                    *c += sse[m.min(sse.len() - 1)];
                }
            }
            let best = curve
                .iter()
                .enumerate()
                .fold(0, |b, (m, v)| if *v < curve[b] { m } else { b });
            let (problem, init) = ebp_problem(scheme, signal, reg, cfg)?;
            if best == 0 {
                let trace = initial_trace(&problem, &init, StopReason::EarlyStopped);
                return Ok((init, trace));
            }
            let stop = StopConfig {
                max_iterations: best,
                ..stop
            };
            ebp_fit(&problem, init, &mut oracle(cfg, 0)?, None, &stop)
        }
    }
}

fn pick(v: &DVector<f64>, idx: &[usize]) -> DVector<f64> {
    DVector::from_iterator(idx.len(), idx.iter().map(|&i| v[i]))
}

/// Fascicle directions of a fitted mixture.
pub fn directions(model: &MixtureModel<TensorParams>) -> Vec<Vector3<f64>> {
    model.components().iter().map(|c| c.params.direction).collect()
}
