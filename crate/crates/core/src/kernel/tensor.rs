//! Axially symmetric diffusion tensor kernel
//! `f(x) = exp(-b' x^T D x)` with `D = l1 v v^T + l2 (I - v v^T)`.
//!
//! Diffusivities are in um^2/ms and b-values in s/mm^2, so the exponent is
//! `b * 1e-3 * x^T D x`.

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{EuclideanKernel, KernelFamily, SearchDomain, SmoothKernel};
use crate::error::{Error, Result};
use crate::sphere::{axis_angle, canonical_axis, random_unit, tangent_basis};

/// Admissible axial diffusivity, um^2/ms.
pub const AXIAL_RANGE: (f64, f64) = (0.5, 2.0);

const UNIT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct AcquisitionScheme {
    directions: Vec<Vector3<f64>>,
    b_value: f64,
}

impl AcquisitionScheme {
    pub fn new(directions: Vec<Vector3<f64>>, b_value: f64) -> Result<Self> {
        if !(b_value > 0.0 && b_value.is_finite()) {
            return Err(Error::InvalidArgument(format!("b-value must be positive, got {b_value}")));
        }
        if directions.is_empty() {
            return Err(Error::InvalidArgument("scheme has no directions".into()));
        }
        if let Some(d) = directions.iter().find(|d| (d.norm() - 1.0).abs() > UNIT_TOL) {
            return Err(Error::InvalidArgument(format!("direction {d:?} is not unit length")));
        }
        Ok(Self { directions, b_value })
    }

    pub fn directions(&self) -> &[Vector3<f64>] {
        &self.directions
    }

    pub fn b_value(&self) -> f64 {
        self.b_value
    }

    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }

    /// Exponent scale `b * 1e-3` for diffusivities in um^2/ms.
    pub fn exponent_scale(&self) -> f64 {
        self.b_value * 1e-3
    }

    pub fn subset(&self, indices: &[usize]) -> AcquisitionScheme {
        AcquisitionScheme {
            directions: indices.iter().map(|&i| self.directions[i]).collect(),
            b_value: self.b_value,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TensorParams {
    pub direction: Vector3<f64>,
    /// Axial diffusivity, um^2/ms.
    pub axial: f64,
    /// Radial diffusivity, um^2/ms.
    pub radial: f64,
}

impl TensorParams {
    pub fn new(direction: Vector3<f64>, axial: f64, radial: f64) -> Result<Self> {
        let n = direction.norm();
        if !(n.is_finite() && n > 0.0) || !axial.is_finite() || !radial.is_finite() {
            return Err(Error::NonFinite("tensor parameters"));
        }
        if !(0.0..=axial).contains(&radial) {
            return Err(Error::InvalidArgument(format!(
                "need 0 <= radial <= axial, got axial {axial}, radial {radial}"
            )));
        }
        Ok(Self {
            direction: canonical_axis(&(direction / n)),
            axial,
            radial,
        })
    }

    pub fn tensor(&self) -> Matrix3<f64> {
        let v = self.direction;
        let vvt = v * v.transpose();
        vvt * self.axial + (Matrix3::identity() - vvt) * self.radial
    }

    /// `x^T D x` for unit `x`.
    fn quadratic_form(&self, x: &Vector3<f64>) -> f64 {
        let c = x.dot(&self.direction);
        self.radial + (self.axial - self.radial) * c * c
    }
}

pub fn tensor_kernel_eval(params: &TensorParams, scheme: &AcquisitionScheme) -> DVector<f64> {
    let bs = scheme.exponent_scale();
    DVector::from_iterator(
        scheme.len(),
        scheme
            .directions
            .iter()
            .map(|x| (-bs * params.quadratic_form(x)).exp()),
    )
}

/// `n x 4` gradient of each kernel entry with respect to
/// `(u1, u2, axial, radial)`, where `u` are coordinates in the tangent plane
/// at the direction (basis from [`tangent_basis`]) and the direction moves as
/// `normalize(v + u1 e1 + u2 e2)`.
pub fn tensor_kernel_grad(params: &TensorParams, scheme: &AcquisitionScheme) -> DMatrix<f64> {
    let bs = scheme.exponent_scale();
    let v = params.direction;
    let (e1, e2) = tangent_basis(&v);
    let spread = params.axial - params.radial;
    let mut out = DMatrix::zeros(scheme.len(), 4);
    for (i, x) in scheme.directions.iter().enumerate() {
        let c = x.dot(&v);
        let f = (-bs * params.quadratic_form(x)).exp();
        out[(i, 0)] = -bs * f * 2.0 * spread * c * x.dot(&e1);
        out[(i, 1)] = -bs * f * 2.0 * spread * c * x.dot(&e2);
        out[(i, 2)] = -bs * f * c * c;
        out[(i, 3)] = -bs * f * (1.0 - c * c);
    }
    out
}

/// Whether the radial diffusivity is searched or held at zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RadialMode {
    #[default]
    Free,
    Zero,
}

/// The tensor family over `v in S^2`, `axial in [0.5, 2]`,
/// `radial in [0, axial]` (or `radial = 0`).
#[derive(Debug, Clone)]
pub struct TensorKernel {
    scheme: AcquisitionScheme,
    radial: RadialMode,
}

impl TensorKernel {
    pub fn new(scheme: AcquisitionScheme, radial: RadialMode) -> Self {
        Self { scheme, radial }
    }

    pub fn scheme(&self) -> &AcquisitionScheme {
        &self.scheme
    }

    pub fn radial_mode(&self) -> RadialMode {
        self.radial
    }

    fn clamp(&self, direction: Vector3<f64>, axial: f64, radial: f64) -> TensorParams {
        let axial = axial.clamp(AXIAL_RANGE.0, AXIAL_RANGE.1);
        let radial = match self.radial {
            RadialMode::Free => radial.clamp(0.0, axial),
            RadialMode::Zero => 0.0,
        };
        TensorParams {
            direction: canonical_axis(&direction.normalize()),
            axial,
            radial,
        }
    }
}

impl KernelFamily for TensorKernel {
    type Params = TensorParams;

    fn len(&self) -> usize {
        self.scheme.len()
    }

    fn eval(&self, params: &TensorParams) -> DVector<f64> {
        tensor_kernel_eval(params, &self.scheme)
    }

    fn is_valid(&self, p: &TensorParams) -> bool {
        p.direction.iter().all(|v| v.is_finite())
            && ((p.direction.norm() - 1.0).abs() < 1e-6)
            && p.axial.is_finite()
            && p.radial.is_finite()
            && p.radial >= 0.0
            && p.radial <= p.axial
    }

    fn param_distance(&self, a: &TensorParams, b: &TensorParams) -> f64 {
        let angle = axis_angle(&a.direction, &b.direction);
        let diff = (a.axial - b.axial).abs().max((a.radial - b.radial).abs());
        angle.max(diff)
    }

    fn duplicate_tolerance(&self) -> f64 {
        1e-3
    }
}

impl SmoothKernel for TensorKernel {
    fn local_dim(&self) -> usize {
        match self.radial {
            RadialMode::Free => 4,
            RadialMode::Zero => 3,
        }
    }

    fn jacobian(&self, params: &TensorParams) -> DMatrix<f64> {
        let full = tensor_kernel_grad(params, &self.scheme);
        full.columns(0, self.local_dim()).into_owned()
    }

    fn weighted_hessian(&self, params: &TensorParams, weights: &DVector<f64>) -> DMatrix<f64> {
        // q = l2 + (l1 - l2) c^2 with c = x.v(u); at u = 0, dv/du_k = e_k and
        // d2v/du_k du_l = -delta_kl v.
        let bs = self.scheme.exponent_scale();
        let v = params.direction;
        let (e1, e2) = tangent_basis(&v);
        let spread = params.axial - params.radial;
        let d = self.local_dim();
        let mut h = DMatrix::zeros(d, d);
        let mut dq = [0.0; 4];
        let mut d2q = [[0.0; 4]; 4];
        for (i, x) in self.scheme.directions.iter().enumerate() {
            let w = weights[i];
            if w == 0.0 {
                continue;
            }
            let c = x.dot(&v);
            let t = [x.dot(&e1), x.dot(&e2)];
            let f = (-bs * params.quadratic_form(x)).exp();
            dq[0] = 2.0 * spread * c * t[0];
            dq[1] = 2.0 * spread * c * t[1];
            dq[2] = c * c;
            dq[3] = 1.0 - c * c;
            for k in 0..2 {
                for l in 0..2 {
                    let delta = if k == l { c * c } else { 0.0 };
                    d2q[k][l] = 2.0 * spread * (t[k] * t[l] - delta);
                }
                d2q[k][2] = 2.0 * c * t[k];
                d2q[2][k] = d2q[k][2];
                d2q[k][3] = -2.0 * c * t[k];
                d2q[3][k] = d2q[k][3];
            }
            d2q[2][2] = 0.0;
            d2q[2][3] = 0.0;
            d2q[3][2] = 0.0;
            d2q[3][3] = 0.0;
            for k in 0..d {
                for l in 0..d {
                    h[(k, l)] += w * f * (bs * bs * dq[k] * dq[l] - bs * d2q[k][l]);
                }
            }
        }
        h
    }
}

impl SearchDomain for TensorKernel {
    fn sample_start<R: Rng + ?Sized>(&self, rng: &mut R, _index: usize, _count: usize) -> TensorParams {
        let direction = random_unit(rng);
        let axial = rng.random_range(AXIAL_RANGE.0..=AXIAL_RANGE.1);
        let radial = match self.radial {
            RadialMode::Free => rng.random_range(0.0..=axial),
            RadialMode::Zero => 0.0,
        };
        self.clamp(direction, axial, radial)
    }

    fn retract(&self, params: &TensorParams, step: &DVector<f64>) -> TensorParams {
        let (e1, e2) = tangent_basis(&params.direction);
        let direction = params.direction + e1 * step[0] + e2 * step[1];
        let axial = params.axial + step[2];
        let radial = if step.len() > 3 {
            params.radial + step[3]
        } else {
            0.0
        };
        self.clamp(direction, axial, radial)
    }

    fn blocked(&self, p: &TensorParams, g: &DVector<f64>) -> Vec<bool> {
        let eps = 1e-12;
        let mut out = vec![false; self.local_dim()];
        out[2] = (p.axial <= AXIAL_RANGE.0 + eps && g[2] < 0.0)
            || (p.axial >= AXIAL_RANGE.1 - eps && g[2] > 0.0);
        if self.radial == RadialMode::Free {
            out[3] = (p.radial <= eps && g[3] < 0.0) || (p.radial >= p.axial - eps && g[3] > 0.0);
        }
        out
    }
}

/// Coordinates `(polar, azimuth, axial)` with `radial = 0`, for box-grid
/// continuous basis pursuit over the upper hemisphere.
impl EuclideanKernel for TensorKernel {
    fn dim(&self) -> usize {
        3
    }

    fn to_coords(&self, p: &TensorParams) -> Vec<f64> {
        let v = canonical_axis(&p.direction);
        let v = if v.z < 0.0 { -v } else { v };
        vec![v.z.clamp(-1.0, 1.0).acos(), v.y.atan2(v.x), p.axial]
    }

    fn from_coords(&self, c: &[f64]) -> TensorParams {
        let (sp, cp) = c[0].sin_cos();
        let (sa, ca) = c[1].sin_cos();
        TensorParams {
            direction: canonical_axis(&Vector3::new(sp * ca, sp * sa, cp)),
            axial: c[2],
            radial: 0.0,
        }
    }

    fn coord_jacobian(&self, p: &TensorParams) -> Option<DMatrix<f64>> {
        let c = self.to_coords(p);
        let (sp, cp) = c[0].sin_cos();
        let (sa, ca) = c[1].sin_cos();
        let v = Vector3::new(sp * ca, sp * sa, cp);
        let dv_dpolar = Vector3::new(cp * ca, cp * sa, -sp);
        let dv_dazimuth = Vector3::new(-sp * sa, sp * ca, 0.0);
        let bs = self.scheme.exponent_scale();
        let mut out = DMatrix::zeros(self.len(), 3);
        for (i, x) in self.scheme.directions.iter().enumerate() {
            let cos = x.dot(&v);
            let f = (-bs * p.axial * cos * cos).exp();
            out[(i, 0)] = -bs * f * p.axial * 2.0 * cos * x.dot(&dv_dpolar);
            out[(i, 1)] = -bs * f * p.axial * 2.0 * cos * x.dot(&dv_dazimuth);
            out[(i, 2)] = -bs * f * cos * cos;
        }
        Some(out)
    }
}
