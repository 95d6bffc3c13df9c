use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

/// Column header of the exported trace CSV.
pub const TRACE_HEADER: &str = "iteration,K,train_mse,valid_mse,rho_hat,wall_ms";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// The oracle's correlation fell below the dual tolerance.
    Converged,
    MaxIterations,
    /// The oracle returned an invalid parameter.
    OracleFailure,
    /// Validation error did not improve for `patience` iterations.
    EarlyStopped,
    /// A refit failed to lower the objective, so the previous model was kept.
    Stalled,
}

/// State after `iteration` oracle/refit rounds; row 0 is the initialization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iteration: usize,
    pub active_size: usize,
    /// `||r~||^2`
    pub objective: f64,
    /// `||r~||^2 / n~`
    pub train_mse: f64,
    pub valid_mse: Option<f64>,
    /// Correlation the oracle achieved on this row's residual. Absent on the
    /// last row when the loop ended without calling the oracle again.
    pub rho_hat: Option<f64>,
    /// Largest `|<r~, f~_k>| / (||r~|| ||f~_k||)` over active kernels.
    pub max_active_correlation: f64,
    pub wall_ms: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitTrace {
    pub records: Vec<TraceRecord>,
    pub stop_reason: StopReason,
    /// Row whose model was returned (differs from the last row only after
    /// early stopping).
    pub selected: usize,
}

impl FitTrace {
    pub fn objectives(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.objective).collect()
    }

    /// Number of oracle/refit rounds completed.
    pub fn iterations(&self) -> usize {
        self.records.last().map_or(0, |r| r.iteration)
    }

    pub fn is_monotone(&self) -> bool {
        self.records
            .windows(2)
            .all(|w| w[1].objective <= w[0].objective)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(TRACE_HEADER);
        out.push('\n');
        for r in &self.records {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                r.iteration,
                r.active_size,
                r.train_mse,
                opt(r.valid_mse),
                opt(r.rho_hat),
                opt(r.wall_ms)
            );
        }
        out
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}
