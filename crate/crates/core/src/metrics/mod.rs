//! Prediction error and fODF distance of fitted models.

mod emd;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::baselines::DtiModel;
use crate::ebp::MixtureModel;
use crate::error::{Error, Result};
use crate::kernel::{tensor_kernel_eval, AcquisitionScheme, TensorParams};
use crate::simulate::GroundTruth;

pub use emd::{emd, transport, DiscreteFodf, Spike};

pub fn rmse(prediction: &DVector<f64>, observed: &DVector<f64>) -> Result<f64> {
    if prediction.len() != observed.len() {
        return Err(Error::Dimension(format!(
            "prediction has length {}, observed {}",
            prediction.len(),
            observed.len()
        )));
    }
    if observed.is_empty() {
        return Err(Error::InvalidArgument("cannot take the RMSE of empty vectors".into()));
    }
    Ok(((prediction - observed).norm_squared() / observed.len() as f64).sqrt())
}

/// A fitted diffusion model: predicts signals and exposes its fODF.
pub trait DiffusionModel {
    fn predict(&self, scheme: &AcquisitionScheme) -> DVector<f64>;
    fn fodf(&self) -> DiscreteFodf;
}

impl DiffusionModel for MixtureModel<TensorParams> {
    fn predict(&self, scheme: &AcquisitionScheme) -> DVector<f64> {
        let mut out = DVector::zeros(scheme.len());
        for c in self.components() {
            out += tensor_kernel_eval(&c.params, scheme) * c.weight;
        }
        out
    }

    fn fodf(&self) -> DiscreteFodf {
        DiscreteFodf::new(self.components().iter().map(|c| (c.params.direction, c.weight)))
    }
}

/// A unit spike at the principal eigenvector.
impl DiffusionModel for DtiModel {
    fn predict(&self, scheme: &AcquisitionScheme) -> DVector<f64> {
        DtiModel::predict(self, scheme)
    }

    fn fodf(&self) -> DiscreteFodf {
        DiscreteFodf::new([(self.principal_direction(), 1.0)])
    }
}

impl GroundTruth {
    /// Fascicle spikes; a free-water compartment has no direction and is
    /// left out.
    pub fn fodf(&self) -> DiscreteFodf {
        self.model.fodf()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub train_rmse: f64,
    pub test_rmse: f64,
    /// Absent without a ground truth, or when the model has no mass.
    pub emd: Option<f64>,
}

/// RMSE against `signal` on the train and test subsets of `scheme`, and the
/// EMD to the truth's fODF when a truth is given.
pub fn evaluate<M: DiffusionModel + ?Sized>(
    model: &M,
    signal: &DVector<f64>,
    scheme: &AcquisitionScheme,
    train: &[usize],
    test: &[usize],
    truth: Option<&GroundTruth>,
) -> Result<Evaluation> {
    if signal.len() != scheme.len() {
        return Err(Error::Dimension("signal and scheme differ in length".into()));
    }
    if let Some(&i) = train.iter().chain(test).find(|&&i| i >= scheme.len()) {
        return Err(Error::InvalidArgument(format!("partition index {i} out of range")));
    }
    let pred = model.predict(scheme);
    let pick = |idx: &[usize], v: &DVector<f64>| DVector::from_iterator(idx.len(), idx.iter().map(|&i| v[i]));
    let train_rmse = rmse(&pick(train, &pred), &pick(train, signal))?;
    let test_rmse = rmse(&pick(test, &pred), &pick(test, signal))?;
    let emd = match truth {
        None => None,
        Some(t) => {
            let f = model.fodf();
            if f.total_mass() > 0.0 {
                Some(emd(&f, &t.fodf())?)
            } else {
                None
            }
        }
    };
    Ok(Evaluation {
        train_rmse,
        test_rmse,
        emd,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rmse_basics() {
        let a = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        assert_eq!(rmse(&a, &a).unwrap(), 0.0);
        let b = a.add_scalar(0.1);
        assert!((rmse(&b, &a).unwrap() - 0.1).abs() < 1e-12);
        assert!(rmse(&a, &DVector::zeros(2)).is_err());
    }
}
