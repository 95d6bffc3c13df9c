//! Gaussian bump kernel on the line: `f_c(x) = exp(-(x - c)^2 / (2 w^2))`
//! with the center `c` restricted to `[a, b]` and a fixed width `w`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use super::{EuclideanKernel, KernelFamily, SearchDomain, SmoothKernel};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bump1dParams {
    pub center: f64,
}

#[derive(Debug, Clone)]
pub struct BumpKernel {
    abscissae: Vec<f64>,
    width: f64,
    domain: (f64, f64),
}

impl BumpKernel {
    pub fn new(abscissae: Vec<f64>, width: f64, domain: (f64, f64)) -> Result<Self> {
        if abscissae.is_empty() {
            return Err(Error::InvalidArgument("no abscissae".into()));
        }
        if abscissae.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("abscissae"));
        }
        if !(width > 0.0 && width.is_finite()) {
            return Err(Error::InvalidArgument(format!("width must be positive, got {width}")));
        }
        if !(domain.0 <= domain.1) {
            return Err(Error::InvalidArgument(format!("empty domain {domain:?}")));
        }
        Ok(Self {
            abscissae,
            width,
            domain,
        })
    }

    pub fn abscissae(&self) -> &[f64] {
        &self.abscissae
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn domain(&self) -> (f64, f64) {
        self.domain
    }

    /// Same family evaluated on other points.
    pub fn on_points(&self, abscissae: Vec<f64>) -> Result<Self> {
        Self::new(abscissae, self.width, self.domain)
    }
}

pub fn bump1d_eval(params: &Bump1dParams, kernel: &BumpKernel) -> DVector<f64> {
    let s2 = 2.0 * kernel.width * kernel.width;
    DVector::from_iterator(
        kernel.abscissae.len(),
        kernel.abscissae.iter().map(|x| {
            let d = x - params.center;
            (-d * d / s2).exp()
        }),
    )
}

impl KernelFamily for BumpKernel {
    type Params = Bump1dParams;

    fn len(&self) -> usize {
        self.abscissae.len()
    }

    fn eval(&self, params: &Bump1dParams) -> DVector<f64> {
        bump1d_eval(params, self)
    }

    fn is_valid(&self, p: &Bump1dParams) -> bool {
        p.center.is_finite() && p.center >= self.domain.0 && p.center <= self.domain.1
    }

    fn param_distance(&self, a: &Bump1dParams, b: &Bump1dParams) -> f64 {
        (a.center - b.center).abs()
    }

    fn duplicate_tolerance(&self) -> f64 {
        1e-6
    }
}

impl SmoothKernel for BumpKernel {
    fn local_dim(&self) -> usize {
        1
    }

    fn jacobian(&self, p: &Bump1dParams) -> DMatrix<f64> {
        let w2 = self.width * self.width;
        let f = self.eval(p);
        DMatrix::from_iterator(
            self.len(),
            1,
            self.abscissae
                .iter()
                .zip(f.iter())
                .map(|(x, fx)| fx * (x - p.center) / w2),
        )
    }

    fn weighted_hessian(&self, p: &Bump1dParams, weights: &DVector<f64>) -> DMatrix<f64> {
        let w2 = self.width * self.width;
        let f = self.eval(p);
        let mut h = 0.0;
        for (i, x) in self.abscissae.iter().enumerate() {
            let d = x - p.center;
            h += weights[i] * f[i] * (d * d / (w2 * w2) - 1.0 / w2);
        }
        DMatrix::from_element(1, 1, h)
    }
}

impl SearchDomain for BumpKernel {
    /// Stratified: restart `k` of `m` is uniform on the `k`-th of `m` equal
    /// subintervals of the domain.
    fn sample_start<R: Rng + ?Sized>(&self, rng: &mut R, index: usize, count: usize) -> Bump1dParams {
        let (a, b) = self.domain;
        let u: f64 = rng.random();
        let t = (index as f64 + u) / count.max(1) as f64;
        Bump1dParams {
            center: (a + t * (b - a)).clamp(a, b),
        }
    }

    fn retract(&self, p: &Bump1dParams, step: &DVector<f64>) -> Bump1dParams {
        Bump1dParams {
            center: (p.center + step[0]).clamp(self.domain.0, self.domain.1),
        }
    }

    fn blocked(&self, p: &Bump1dParams, g: &DVector<f64>) -> Vec<bool> {
        vec![(p.center <= self.domain.0 && g[0] < 0.0) || (p.center >= self.domain.1 && g[0] > 0.0)]
    }
}

impl EuclideanKernel for BumpKernel {
    fn dim(&self) -> usize {
        1
    }

    fn to_coords(&self, p: &Bump1dParams) -> Vec<f64> {
        vec![p.center]
    }

    fn from_coords(&self, c: &[f64]) -> Bump1dParams {
        Bump1dParams { center: c[0] }
    }

    fn coord_jacobian(&self, p: &Bump1dParams) -> Option<DMatrix<f64>> {
        Some(self.jacobian(p))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivatives_match_finite_differences() {
        let k = BumpKernel::new((0..30).map(|i| i as f64 * 0.1).collect(), 0.25, (0.0, 3.0)).unwrap();
        let p = Bump1dParams { center: 1.234 };
        let h = 1e-5;
        let fd = (k.eval(&Bump1dParams { center: p.center + h }) - k.eval(&Bump1dParams { center: p.center - h }))
            / (2.0 * h);
        assert!((fd - k.jacobian(&p).column(0)).amax() < 1e-8);

        let w = DVector::from_fn(30, |i, _| (i as f64).sin());
        let g = |c: f64| k.jacobian(&Bump1dParams { center: c }).column(0).dot(&w);
        let fd2 = (g(p.center + h) - g(p.center - h)) / (2.0 * h);
        assert!((fd2 - k.weighted_hessian(&p, &w)[(0, 0)]).abs() < 1e-6);
    }

    #[test]
    fn peak_value_is_one() {
        let k = BumpKernel::new(vec![0.5], 0.1, (0.0, 1.0)).unwrap();
        assert_eq!(k.eval(&Bump1dParams { center: 0.5 })[0], 1.0);
    }
}
