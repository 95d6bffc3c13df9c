//! Single-tensor model fitted by unweighted log-linear least squares:
//! `log s_i = log s0 - b' x_i^T D x_i`.

use nalgebra::{DMatrix, DVector, Matrix3, SymmetricEigen, Vector3};

use crate::error::{Error, Result};
use crate::kernel::AcquisitionScheme;
use crate::linalg::least_squares;

/// Eigenvalues above this negative threshold are treated as round-off.
const EIGEN_FLOOR: f64 = -1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct DtiModel {
    /// Symmetric positive semidefinite, um^2/ms.
    pub tensor: Matrix3<f64>,
    pub s0: f64,
}

impl DtiModel {
    /// Eigenvalues in descending order with matching unit eigenvectors.
    pub fn eigen(&self) -> ([f64; 3], [Vector3<f64>; 3]) {
        let e = SymmetricEigen::new(self.tensor);
        let mut idx = [0usize, 1, 2];
        idx.sort_by(|&a, &b| e.eigenvalues[b].total_cmp(&e.eigenvalues[a]));
        let values = idx.map(|i| e.eigenvalues[i]);
        let vectors = idx.map(|i| e.eigenvectors.column(i).into_owned());
        (values, vectors)
    }

    pub fn principal_direction(&self) -> Vector3<f64> {
        self.eigen().1[0]
    }

    pub fn fractional_anisotropy(&self) -> f64 {
        let (l, _) = self.eigen();
        let mean = (l[0] + l[1] + l[2]) / 3.0;
        let num: f64 = l.iter().map(|v| (v - mean).powi(2)).sum();
        let den: f64 = l.iter().map(|v| v * v).sum();
        if den == 0.0 {
            0.0
        } else {
            (1.5 * num / den).sqrt()
        }
    }

    pub fn predict(&self, scheme: &AcquisitionScheme) -> DVector<f64> {
        let bs = scheme.exponent_scale();
        DVector::from_iterator(
            scheme.len(),
            scheme
                .directions()
                .iter()
                .map(|x| self.s0 * (-bs * (x.transpose() * self.tensor * x)[0]).exp()),
        )
    }
}

/// Regresses `log s` on `[-b' x^2, -b' y^2, -b' z^2, -2b' xy, -2b' xz,
/// -2b' yz]`; negative eigenvalues are clamped to zero.
///
/// On a single shell `x^2 + y^2 + z^2 = 1`, so `log s0` is confounded with
/// the trace of `D`: the fit takes `s0 = 1` unless that would leave `D`
/// with a negative eigenvalue, in which case the isotropic part is moved
/// into `s0`.
pub fn dti_fit(scheme: &AcquisitionScheme, signal: &DVector<f64>) -> Result<DtiModel> {
    let n = scheme.len();
    if n < 6 {
        return Err(Error::InvalidArgument(format!("DTI needs at least 6 directions, got {n}")));
    }
    if signal.len() != n {
        return Err(Error::Dimension(format!(
            "signal has length {} but scheme has {n} directions",
            signal.len()
        )));
    }
    if signal.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("signal"));
    }
    if let Some(v) = signal.iter().find(|v| **v <= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "DTI needs a positive signal, found {v}"
        )));
    }
    let bs = scheme.exponent_scale();
    let mut a = DMatrix::zeros(n, 6);
    for (i, x) in scheme.directions().iter().enumerate() {
        a[(i, 0)] = -bs * x.x * x.x;
        a[(i, 1)] = -bs * x.y * x.y;
        a[(i, 2)] = -bs * x.z * x.z;
        a[(i, 3)] = -2.0 * bs * x.x * x.y;
        a[(i, 4)] = -2.0 * bs * x.x * x.z;
        a[(i, 5)] = -2.0 * bs * x.y * x.z;
    }
    let coef = least_squares(&a, &signal.map(f64::ln));
    let raw = Matrix3::new(
        coef[0], coef[3], coef[4], //
        coef[3], coef[1], coef[5], //
        coef[4], coef[5], coef[2],
    );
    // Only D + (log s0 / b') I is identifiable on one shell. Pick the
    // representative with the smallest s0 >= 1 that makes D semidefinite;
    // predictions are unchanged.
    let e = SymmetricEigen::new(raw);
    let shift = e.eigenvalues.min().min(0.0);
    let clamped = e.eigenvalues.map(|v| {
        let v = v - shift;
        if v < EIGEN_FLOOR {
            0.0
        } else {
            v.max(0.0)
        }
    });
    let tensor = &e.eigenvectors * Matrix3::from_diagonal(&clamped) * e.eigenvectors.transpose();
    // exact symmetry
    let tensor = (tensor + tensor.transpose()) * 0.5;
    Ok(DtiModel {
        tensor,
        s0: (-bs * shift).exp(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{tensor_kernel_eval, TensorParams};
    use crate::simulate::make_directions;

    fn scheme() -> AcquisitionScheme {
        AcquisitionScheme::new(make_directions(40, 3).unwrap(), 1000.0).unwrap()
    }

    #[test]
    fn exact_on_single_tensor() {
        let s = scheme();
        let v = Vector3::new(0.2, 0.5, -0.8).normalize();
        let p = TensorParams::new(v, 1.5, 0.3).unwrap();
        let m = dti_fit(&s, &tensor_kernel_eval(&p, &s)).unwrap();
        let (l, e) = m.eigen();
        assert!((l[0] - 1.5).abs() < 1e-8 && (l[1] - 0.3).abs() < 1e-8 && (l[2] - 0.3).abs() < 1e-8);
        assert!(e[0].dot(&v).abs() > 1.0 - 1e-9);
        assert_eq!(m.tensor, m.tensor.transpose());
    }

    #[test]
    fn isotropic_has_zero_fa() {
        let s = scheme();
        let p = TensorParams::new(Vector3::x(), 0.9, 0.9).unwrap();
        let m = dti_fit(&s, &tensor_kernel_eval(&p, &s)).unwrap();
        assert!(m.fractional_anisotropy().abs() < 1e-8);
    }

    #[test]
    fn scaled_signal_moves_into_s0() {
        let s = scheme();
        let p = TensorParams::new(Vector3::z(), 1.2, 0.0).unwrap();
        let y = tensor_kernel_eval(&p, &s) * 2.0;
        let m = dti_fit(&s, &y).unwrap();
        assert!((m.s0 - 2.0).abs() < 1e-9);
        assert!((m.predict(&s) - &y).amax() < 1e-9);
        assert!(m.eigen().0[2] >= 0.0);
    }

    #[test]
    fn rejects_nonpositive_signal() {
        let s = scheme();
        let mut y = DVector::from_element(40, 0.5);
        y[3] = 0.0;
        assert!(dti_fit(&s, &y).is_err());
    }
}
