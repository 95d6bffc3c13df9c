//! First-order continuous basis pursuit over axis-aligned box cells.
//!
//! Each grid point `c_i` owns the box `c_i +- h`. For every distinct vertex
//! `v_ij` of that box the dictionary holds the first-order Taylor column
//! `f(c_i) + J(c_i) (v_ij - c_i)`. NNLS over these columns gives `gamma`,
//! and cell `i` contributes a component with weight `sum_j gamma_ij` at
//! `sum_j gamma_ij v_ij / sum_j gamma_ij`, which stays inside the cell.

use nalgebra::{DMatrix, DVector};

use crate::ebp::{Component, MixtureModel, RegularizationSpec};
use crate::error::{Error, Result};
use crate::kernel::EuclideanKernel;
use crate::nnls::{nnls_solve, NnlsProblem};

#[derive(Debug, Clone, PartialEq)]
pub struct FocbpDictionary {
    pub centers: Vec<Vec<f64>>,
    pub half_widths: Vec<f64>,
    /// Distinct vertices of each cell; a zero half-width collapses a
    /// coordinate, so a zero-width cell has the single vertex `c_i`.
    pub vertices: Vec<Vec<Vec<f64>>>,
    /// `n x sum_i m_i`, cell-major.
    pub columns: DMatrix<f64>,
    /// `(cell, vertex)` of each column.
    pub owner: Vec<(usize, usize)>,
}

/// Vertices of the box `center +- half_widths`, deduplicated.
pub fn box_vertices(center: &[f64], half_widths: &[f64]) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = vec![Vec::with_capacity(center.len())];
    for (c, &h) in center.iter().zip(half_widths) {
        let offsets: &[f64] = if h == 0.0 { &[0.0] } else { &[-1.0, 1.0] };
        out = out
            .into_iter()
            .flat_map(|v| {
                offsets.iter().map(move |o| {
                    let mut w = v.clone();
                    w.push(c + o * h);
                    w
                })
            })
            .collect();
    }
    out
}

/// Cell centers and half-widths of a regular grid with `counts[d]` cells
/// along `bounds[d]`.
pub fn box_grid(bounds: &[(f64, f64)], counts: &[usize]) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    if bounds.len() != counts.len() || counts.contains(&0) {
        return Err(Error::InvalidArgument("need a positive cell count per dimension".into()));
    }
    let half: Vec<f64> = bounds
        .iter()
        .zip(counts)
        .map(|((a, b), &k)| (b - a) / (2.0 * k as f64))
        .collect();
    let mut centers: Vec<Vec<f64>> = vec![Vec::new()];
    for (d, ((a, _), &k)) in bounds.iter().zip(counts).enumerate() {
        let h = half[d];
        centers = centers
            .into_iter()
            .flat_map(|c| {
                (0..k).map(move |i| {
                    let mut c = c.clone();
                    c.push(a + (2 * i + 1) as f64 * h);
                    c
                })
            })
            .collect();
    }
    Ok((centers, half))
}

pub fn focbp_build<K: EuclideanKernel>(
    family: &K,
    centers: &[Vec<f64>],
    half_widths: &[f64],
) -> Result<FocbpDictionary> {
    let dim = family.dim();
    if centers.is_empty() {
        return Err(Error::InvalidArgument("no grid points".into()));
    }
    if half_widths.len() != dim || centers.iter().any(|c| c.len() != dim) {
        return Err(Error::Dimension(format!("cells must be {dim}-dimensional")));
    }
    if half_widths.iter().any(|h| !(*h >= 0.0 && h.is_finite())) {
        return Err(Error::InvalidArgument("half-widths must be nonnegative".into()));
    }
    let mut cols: Vec<DVector<f64>> = Vec::new();
    let mut owner = Vec::new();
    let mut vertices = Vec::with_capacity(centers.len());
    for (i, c) in centers.iter().enumerate() {
        let p = family.from_coords(c);
        let f = family.eval(&p);
        let verts = box_vertices(c, half_widths);
        let jac = if verts.len() > 1 {
            Some(family.coord_jacobian(&p).ok_or(Error::GradientUnavailable)?)
        } else {
            None
        };
        for (j, v) in verts.iter().enumerate() {
            let mut col = f.clone();
            if let Some(jac) = &jac {
                let delta = DVector::from_iterator(dim, v.iter().zip(c).map(|(a, b)| a - b));
                col += jac * delta;
            }
            if col.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite("FOCBP column"));
            }
            cols.push(col);
            owner.push((i, j));
        }
        vertices.push(verts);
    }
    Ok(FocbpDictionary {
        centers: centers.to_vec(),
        half_widths: half_widths.to_vec(),
        vertices,
        columns: DMatrix::from_columns(&cols),
        owner,
    })
}

/// Component weights and parameters from vertex coefficients.
pub fn focbp_recover<K: EuclideanKernel>(
    family: &K,
    dict: &FocbpDictionary,
    gamma: &DVector<f64>,
) -> MixtureModel<K::Params> {
    let dim = dict.half_widths.len();
    let mut mass = vec![0.0; dict.centers.len()];
    let mut moment = vec![vec![0.0; dim]; dict.centers.len()];
    for (col, &(i, j)) in dict.owner.iter().enumerate() {
        let g = gamma[col];
        if g > 0.0 {
            mass[i] += g;
            // offsets from the center, so a zero-width cell returns it exactly
            for ((m, v), c) in moment[i].iter_mut().zip(&dict.vertices[i][j]).zip(&dict.centers[i]) {
                *m += g * (v - c);
            }
        }
    }
    MixtureModel::new(
        (0..dict.centers.len())
            .filter(|&i| mass[i] > 0.0)
            .map(|i| {
                let coords: Vec<f64> = moment[i].iter().zip(&dict.centers[i]).map(|(m, c)| c + m / mass[i]).collect();
                Component {
                    weight: mass[i],
                    params: family.from_coords(&coords),
                }
            })
            .collect(),
    )
}

pub fn focbp_fit<K: EuclideanKernel>(
    family: &K,
    dict: &FocbpDictionary,
    signal: &DVector<f64>,
    reg: RegularizationSpec,
) -> Result<MixtureModel<K::Params>> {
    reg.validate()?;
    if signal.len() != dict.columns.nrows() {
        return Err(Error::Dimension("signal and dictionary differ in length".into()));
    }
    let (design, target) = match reg.augmentation() {
        None => (dict.columns.clone(), signal.clone()),
        Some((t, s)) => {
            let n = dict.columns.nrows();
            (dict.columns.clone().resize_vertically(n + 1, s), signal.clone().push(t))
        }
    };
    let sol = match nnls_solve(&NnlsProblem::new(design, target)?) {
        Ok(s) => s,
        Err(Error::IterationCap { best, .. }) => *best,
        Err(e) => return Err(e),
    };
    Ok(focbp_recover(family, dict, &sol.coefficients))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{BumpKernel, Bump1dParams, KernelFamily};

    fn bumps() -> BumpKernel {
        BumpKernel::new((0..80).map(|i| i as f64 / 79.0).collect(), 0.05, (0.0, 1.0)).unwrap()
    }

    #[test]
    fn zero_width_cell_is_plain_column() {
        let k = bumps();
        let d = focbp_build(&k, &[vec![0.3]], &[0.0]).unwrap();
        assert_eq!(d.columns.ncols(), 1);
        assert_eq!(d.columns.column(0).into_owned(), k.eval(&Bump1dParams { center: 0.3 }));
    }

    #[test]
    fn columns_match_direct_taylor_expansion() {
        let k = bumps();
        let (c, h, w) = (0.41, 0.02, 0.05f64);
        let d = focbp_build(&k, &[vec![c]], &[h]).unwrap();
        for (j, v) in [c - h, c + h].iter().enumerate() {
            for (i, x) in k.abscissae().iter().enumerate() {
                let f = (-(x - c).powi(2) / (2.0 * w * w)).exp();
                let df = f * (x - c) / (w * w);
                let expect = f + (v - c) * df;
                assert!((d.columns[(i, j)] - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn recovery_is_vertex_average() {
        let k = bumps();
        let d = focbp_build(&k, &[vec![0.5]], &[0.1]).unwrap();
        let one = focbp_recover(&k, &d, &DVector::from_vec(vec![0.0, 2.0]));
        assert_eq!(one.components()[0].params.center, 0.6);
        assert_eq!(one.components()[0].weight, 2.0);
        let even = focbp_recover(&k, &d, &DVector::from_vec(vec![1.0, 1.0]));
        assert!((even.components()[0].params.center - 0.5).abs() < 1e-15);
    }

    #[test]
    fn zero_width_fit_is_grid_nnls() {
        use crate::baselines::grid_nnls_fit;
        let k = bumps();
        let centers: Vec<f64> = (0..9).map(|i| 0.1 + 0.1 * i as f64).collect();
        let cells: Vec<Vec<f64>> = centers.iter().map(|c| vec![*c]).collect();
        let grid: Vec<Bump1dParams> = centers.iter().map(|&c| Bump1dParams { center: c }).collect();
        let y = k.eval(&Bump1dParams { center: 0.437 }) * 0.8;
        let d = focbp_build(&k, &cells, &[0.0]).unwrap();
        let reg = RegularizationSpec::volume_anchor(1.0, 1.0);
        assert_eq!(focbp_fit(&k, &d, &y, reg).unwrap(), grid_nnls_fit(k.clone(), &y, &grid, reg).unwrap());
    }

    #[test]
    fn box_grid_tiles_the_domain() {
        let (c, h) = box_grid(&[(0.0, 1.0), (2.0, 4.0)], &[2, 4]).unwrap();
        assert_eq!(c.len(), 8);
        assert_eq!(h, vec![0.25, 0.25]);
        assert_eq!(c[0], vec![0.25, 2.25]);
        assert_eq!(box_vertices(&c[0], &h).len(), 4);
    }
}
