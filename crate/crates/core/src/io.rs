//! Versioned JSON files for datasets, fitted models and metrics.
//!
//! Every file carries `version = "MAJOR.MINOR"`; loaders accept any minor
//! of [`SCHEMA_MAJOR`] and reject everything else.

use std::path::Path;

use nalgebra::{DVector, Matrix3, Vector3};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::baselines::DtiModel;
use crate::ebp::{Component, MixtureModel};
use crate::error::{Error, Result};
use crate::kernel::{AcquisitionScheme, TensorParams};
use crate::methods::{Fitted, Method};
use crate::metrics::Evaluation;
use crate::simulate::{GroundTruth, Simulation, SimulationConfig};

pub const SCHEMA_MAJOR: u32 = 1;
pub const SCHEMA_VERSION: &str = "1.0";

pub fn check_version(found: &str) -> Result<()> {
    let major = found.split('.').next().and_then(|m| m.parse::<u32>().ok());
    if major == Some(SCHEMA_MAJOR) {
        Ok(())
    } else {
        Err(Error::SchemaVersion {
            found: found.to_string(),
            expected: SCHEMA_MAJOR,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeDto {
    pub b: f64,
    pub directions: Vec<[f64; 3]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComponentDto {
    pub v: [f64; 3],
    pub lambda1: f64,
    pub lambda2: f64,
    pub w: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IsotropicDto {
    pub w: f64,
    pub diffusivity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthDto {
    pub components: Vec<ComponentDto>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub isotropic: Option<IsotropicDto>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionDto {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetFile {
    pub version: String,
    pub scheme: SchemeDto,
    pub signal: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clean: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth: Option<TruthDto>,
    pub partition: PartitionDto,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<SimulationConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub version: String,
    pub method: Method,
    pub components: Vec<ComponentDto>,
    /// Row-major diffusion tensor of a DTI fit.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tensor: Option<[[f64; 3]; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s0: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsFile {
    pub version: String,
    pub train_rmse: f64,
    pub test_rmse: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub emd: Option<f64>,
}

/// In-memory dataset; `truth` is absent for measured data.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub scheme: AcquisitionScheme,
    pub signal: DVector<f64>,
    pub truth: Option<GroundTruth>,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    pub config: Option<SimulationConfig>,
}

impl Dataset {
    pub fn from_simulation(sim: Simulation, config: Option<SimulationConfig>) -> Self {
        Self {
            scheme: sim.scheme,
            signal: sim.signal,
            truth: Some(sim.truth),
            train: sim.train,
            test: sim.test,
            config,
        }
    }

    pub fn train_scheme(&self) -> AcquisitionScheme {
        self.scheme.subset(&self.train)
    }

    pub fn train_signal(&self) -> DVector<f64> {
        DVector::from_iterator(self.train.len(), self.train.iter().map(|&i| self.signal[i]))
    }

    pub fn to_file(&self) -> DatasetFile {
        DatasetFile {
            version: SCHEMA_VERSION.to_string(),
            scheme: SchemeDto {
                b: self.scheme.b_value(),
                directions: self.scheme.directions().iter().map(|d| [d.x, d.y, d.z]).collect(),
            },
            signal: self.signal.iter().copied().collect(),
            clean: self.truth.as_ref().map(|t| t.clean.iter().copied().collect()),
            truth: self.truth.as_ref().map(|t| TruthDto {
                components: mixture_to_dto(&t.model),
                isotropic: t.isotropic.map(|(w, diffusivity)| IsotropicDto { w, diffusivity }),
            }),
            partition: PartitionDto {
                train: self.train.clone(),
                test: self.test.clone(),
            },
            config: self.config,
        }
    }

    pub fn from_file(file: DatasetFile) -> Result<Self> {
        check_version(&file.version)?;
        let directions = file.scheme.directions.iter().map(|d| Vector3::from(*d)).collect();
        let scheme = AcquisitionScheme::new(directions, file.scheme.b)?;
        let n = scheme.len();
        if file.signal.len() != n {
            return Err(Error::Dimension(format!(
                "signal has length {} but the scheme has {n} directions",
                file.signal.len()
            )));
        }
        let mut seen = vec![false; n];
        for &i in file.partition.train.iter().chain(&file.partition.test) {
            if i >= n || seen[i] {
                return Err(Error::InvalidArgument(format!(
                    "partition index {i} is out of range or repeated"
                )));
            }
            seen[i] = true;
        }
        if file.partition.train.is_empty() {
            return Err(Error::InvalidArgument("empty training partition".into()));
        }
        let truth = match file.truth {
            None => None,
            Some(t) => {
                let model = mixture_from_dto(&t.components)?;
                let mut truth = GroundTruth {
                    model,
                    isotropic: t.isotropic.map(|i| (i.w, i.diffusivity)),
                    clean: DVector::zeros(0),
                };
                truth.clean = match file.clean {
                    Some(c) if c.len() == n => DVector::from_vec(c),
                    Some(_) => return Err(Error::Dimension("clean signal length".into())),
                    None => truth.signal_on(&scheme),
                };
                Some(truth)
            }
        };
        Ok(Self {
            scheme,
            signal: DVector::from_vec(file.signal),
            truth,
            train: file.partition.train,
            test: file.partition.test,
            config: file.config,
        })
    }
}

pub fn mixture_to_dto(model: &MixtureModel<TensorParams>) -> Vec<ComponentDto> {
    model
        .components()
        .iter()
        .map(|c| ComponentDto {
            v: [c.params.direction.x, c.params.direction.y, c.params.direction.z],
            lambda1: c.params.axial,
            lambda2: c.params.radial,
            w: c.weight,
        })
        .collect()
}

pub fn mixture_from_dto(components: &[ComponentDto]) -> Result<MixtureModel<TensorParams>> {
    components
        .iter()
        .map(|c| {
            if !(c.w >= 0.0 && c.w.is_finite()) {
                return Err(Error::InvalidArgument(format!("invalid component weight {}", c.w)));
            }
            Ok(Component {
                weight: c.w,
                params: TensorParams::new(Vector3::from(c.v), c.lambda1, c.lambda2)?,
            })
        })
        .collect::<Result<Vec<_>>>()
        .map(MixtureModel::new)
}

impl ModelFile {
    pub fn from_fitted(method: Method, model: &Fitted) -> Self {
        let (components, tensor, s0) = match model {
            Fitted::Mixture(m) => (mixture_to_dto(m), None, None),
            Fitted::Dti(d) => {
                let t = d.tensor;
                let rows = [0, 1, 2].map(|i| [t[(i, 0)], t[(i, 1)], t[(i, 2)]]);
                (Vec::new(), Some(rows), Some(d.s0))
            }
        };
        Self {
            version: SCHEMA_VERSION.to_string(),
            method,
            components,
            tensor,
            s0,
        }
    }

    pub fn to_fitted(&self) -> Result<Fitted> {
        check_version(&self.version)?;
        match (self.method, self.tensor) {
            (Method::Dti, Some(rows)) => {
                let tensor = Matrix3::from_fn(|i, j| rows[i][j]);
                if tensor.iter().any(|v| !v.is_finite()) || tensor != tensor.transpose() {
                    return Err(Error::InvalidArgument("DTI tensor must be finite and symmetric".into()));
                }
                Ok(Fitted::Dti(DtiModel {
                    tensor,
                    s0: self.s0.unwrap_or(1.0),
                }))
            }
            (Method::Dti, None) => Err(Error::InvalidArgument("DTI model file has no tensor".into())),
            _ => Ok(Fitted::Mixture(mixture_from_dto(&self.components)?)),
        }
    }
}

impl From<Evaluation> for MetricsFile {
    fn from(e: Evaluation) -> Self {
        Self {
            version: SCHEMA_VERSION.to_string(),
            train_rmse: e.train_rmse,
            test_rmse: e.test_rmse,
            emd: e.emd,
        }
    }
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    std::fs::write(path, to_json(value)?)?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

pub fn load_dataset(path: &Path) -> Result<Dataset> {
    Dataset::from_file(read_json(path)?)
}

pub fn load_model(path: &Path) -> Result<Fitted> {
    read_json::<ModelFile>(path)?.to_fitted()
}
