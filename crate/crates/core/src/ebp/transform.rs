//! Penalties folded into an unregularized least-squares problem by
//! appending one row to the target and to every kernel vector.
//!
//! | kind            | target row   | kernel row | penalty             |
//! |-----------------|--------------|------------|---------------------|
//! | `None`          | -            | -          | 0                   |
//! | `L1Squared`     | `0`          | `sqrt(l)`  | `l ||w||_1^2`       |
//! | `VolumeAnchor`  | `sqrt(l) c`  | `sqrt(l)`  | `l (c - ||w||_1)^2` |

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::model::MixtureModel;
use crate::error::{Error, Result};
use crate::kernel::KernelFamily;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegularizationKind {
    #[default]
    None,
    L1Squared,
    VolumeAnchor,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RegularizationSpec {
    pub kind: RegularizationKind,
    pub lambda: f64,
    /// Only used by `VolumeAnchor`.
    pub c: f64,
}

impl RegularizationSpec {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn l1_squared(lambda: f64) -> Self {
        Self {
            kind: RegularizationKind::L1Squared,
            lambda,
            c: 0.0,
        }
    }

    pub fn volume_anchor(lambda: f64, c: f64) -> Self {
        Self {
            kind: RegularizationKind::VolumeAnchor,
            lambda,
            c,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "lambda must be nonnegative, got {}",
                self.lambda
            )));
        }
        if !(self.c >= 0.0 && self.c.is_finite()) {
            return Err(Error::InvalidArgument(format!("c must be nonnegative, got {}", self.c)));
        }
        Ok(())
    }

    /// `lambda * P(w)` for the given weights.
    pub fn penalty(&self, weights: &[f64]) -> f64 {
        let l1: f64 = weights.iter().map(|w| w.abs()).sum();
        match self.kind {
            RegularizationKind::None => 0.0,
            RegularizationKind::L1Squared => self.lambda * l1 * l1,
            RegularizationKind::VolumeAnchor => self.lambda * (self.c - l1) * (self.c - l1),
        }
    }

    /// `(target entry, kernel entry)` of the augmentation row, if any.
    pub fn augmentation(&self) -> Option<(f64, f64)> {
        let s = self.lambda.sqrt();
        match self.kind {
            RegularizationKind::None => None,
            RegularizationKind::L1Squared => Some((0.0, s)),
            RegularizationKind::VolumeAnchor => Some((s * self.c, s)),
        }
    }
}

/// The transformed target `y~` and lifted kernel map `theta -> f~_theta`.
#[derive(Debug, Clone)]
pub struct TransformedProblem<K: KernelFamily> {
    family: K,
    observed: DVector<f64>,
    target: DVector<f64>,
    augmentation: Option<f64>,
    regularization: RegularizationSpec,
}

pub fn transform<K: KernelFamily>(
    y: DVector<f64>,
    family: K,
    reg: RegularizationSpec,
) -> Result<TransformedProblem<K>> {
    reg.validate()?;
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("signal"));
    }
    if y.len() != family.len() {
        return Err(Error::Dimension(format!(
            "signal has length {} but kernel family has {} points",
            y.len(),
            family.len()
        )));
    }
    let (target, augmentation) = match reg.augmentation() {
        None => (y.clone(), None),
        Some((t, k)) => (y.push(t), Some(k)),
    };
    Ok(TransformedProblem {
        family,
        observed: y,
        target,
        augmentation,
        regularization: reg,
    })
}

impl<K: KernelFamily> TransformedProblem<K> {
    pub fn family(&self) -> &K {
        &self.family
    }

    /// Untransformed signal `y`.
    pub fn observed(&self) -> &DVector<f64> {
        &self.observed
    }

    /// Transformed target `y~`.
    pub fn target(&self) -> &DVector<f64> {
        &self.target
    }

    /// Kernel entry of the augmentation row (`sqrt(lambda)`), if any.
    pub fn augmentation(&self) -> Option<f64> {
        self.augmentation
    }

    pub fn regularization(&self) -> &RegularizationSpec {
        &self.regularization
    }

    /// `n~`
    pub fn transformed_len(&self) -> usize {
        self.target.len()
    }

    pub fn lift(&self, params: &K::Params) -> DVector<f64> {
        let f = self.family.eval(params);
        match self.augmentation {
            None => f,
            Some(s) => f.push(s),
        }
    }

    /// `n~ x k` matrix of lifted kernel columns.
    pub fn design(&self, params: &[K::Params]) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.transformed_len(), params.len());
        for (j, p) in params.iter().enumerate() {
            m.set_column(j, &self.lift(p));
        }
        m
    }

    /// `y~ - sum_k w_k f~_k`
    pub fn residual(&self, model: &MixtureModel<K::Params>) -> DVector<f64> {
        let mut r = self.target.clone();
        for c in model.components() {
            r -= self.lift(&c.params) * c.weight;
        }
        r
    }

    /// `||y~ - sum_k w_k f~_k||^2`
    pub fn objective(&self, model: &MixtureModel<K::Params>) -> f64 {
        self.residual(model).norm_squared()
    }

    /// Untransformed `||y - sum_k w_k f_k||^2`.
    pub fn data_ssr(&self, model: &MixtureModel<K::Params>) -> f64 {
        (&self.observed - model.predict(&self.family)).norm_squared()
    }
}
