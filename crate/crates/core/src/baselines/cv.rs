//! K-fold choice of the volume-anchor target `c` for grid NNLS.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::grid::grid_nnls_fit;
use crate::ebp::RegularizationSpec;
use crate::error::{Error, Result};
use crate::kernel::KernelFamily;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub best_c: f64,
    /// `(c, mean held-out squared error)` per candidate.
    pub scores: Vec<(f64, f64)>,
}

/// `count` log-spaced values from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..count)
        .map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp())
        .collect()
}

/// Fold `k` holds the measurements with index `i % folds == k`. Each
/// candidate `c` is scored by the held-out squared error of a grid NNLS fit
/// with penalty `lambda (c - ||w||_1)^2` on the other folds. Ties go to the
/// earlier candidate.
pub fn cross_validate_c<K, F>(
    make_family: F,
    signal: &DVector<f64>,
    grid: &[K::Params],
    lambda: f64,
    candidates: &[f64],
    folds: usize,
) -> Result<CvResult>
where
    K: KernelFamily,
    F: Fn(&[usize]) -> K,
{
    let n = signal.len();
    if folds < 2 || folds > n {
        return Err(Error::InvalidArgument(format!(
            "need 2 <= folds <= {n}, got {folds}"
        )));
    }
    if candidates.is_empty() {
        return Err(Error::InvalidArgument("no candidate values of c".into()));
    }
    let mut scores = Vec::with_capacity(candidates.len());
    for &c in candidates {
        let mut sse = 0.0;
        for k in 0..folds {
            let (held, kept): (Vec<usize>, Vec<usize>) = (0..n).partition(|i| i % folds == k);
            let y = DVector::from_iterator(kept.len(), kept.iter().map(|&i| signal[i]));
            let model = grid_nnls_fit(
                make_family(&kept),
                &y,
                grid,
                RegularizationSpec::volume_anchor(lambda, c),
            )?;
            let pred = model.predict(&make_family(&held));
            sse += held
                .iter()
                .zip(pred.iter())
                .map(|(&i, p)| (signal[i] - p).powi(2))
                .sum::<f64>();
        }
        scores.push((c, sse / n as f64));
    }
    let best_c = scores
        .iter()
        .fold(None, |best: Option<(f64, f64)>, &(c, s)| match best {
            Some((_, b)) if b <= s => best,
            _ => Some((c, s)),
        })
        .map(|(c, _)| c)
        .expect("at least one candidate");
    Ok(CvResult { best_c, scores })
}
