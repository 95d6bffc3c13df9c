//! Seeded batches of simulated voxels fitted by several methods.
//!
//! Rows are produced in trial order regardless of the worker count, and
//! wall times are left blank unless `--timing` is given, so the CSV bytes
//! depend only on the arguments.

use std::fmt::Write as _;

use ebp_core::io::{write_json, Dataset};
use ebp_core::methods::{fit_voxel, Method};
use ebp_core::metrics::{evaluate, Evaluation};
use ebp_core::simulate::{generate, generate_on, Simulation};
use rayon::prelude::*;
use serde_json::json;

use crate::{BenchArgs, CliResult, Outcome, RunManifest, MAX_FAILURE_FRACTION};

pub const BENCH_HEADER: &str = "trial,method,status,train_rmse,test_rmse,emd,K_final,iterations,wall_ms";

#[derive(Debug, Clone, PartialEq)]
pub struct TrialMetrics {
    pub evaluation: Evaluation,
    pub components: usize,
    pub iterations: usize,
    pub wall_ms: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub trial: u64,
    pub method: Method,
    pub result: Result<TrialMetrics, String>,
}

#[derive(Debug, Clone)]
pub struct BenchReport {
    pub records: Vec<TrialRecord>,
    pub csv: String,
}

impl BenchReport {
    pub fn failures(&self) -> usize {
        self.records.iter().filter(|r| r.result.is_err()).count()
    }
}

fn fit_one(sim: &Simulation, method: Method, args: &BenchArgs, seed: u64) -> Result<TrialMetrics, String> {
    let train_scheme = sim.scheme.subset(&sim.train);
    let train_signal = nalgebra::DVector::from_iterator(sim.train.len(), sim.train.iter().map(|&i| sim.signal[i]));
    let cfg = args.method_args.config(seed);
    let out = fit_voxel(method, &train_scheme, &train_signal, &cfg).map_err(|e| e.to_string())?;
    let evaluation = evaluate(&out.model, &sim.signal, &sim.scheme, &sim.train, &sim.test, Some(&sim.truth))
        .map_err(|e| e.to_string())?;
    Ok(TrialMetrics {
        evaluation,
        components: out.model.components(),
        iterations: out.iterations,
        wall_ms: cfg.timing.then_some(out.wall_ms),
    })
}

/// Runs every trial with `args.jobs` workers; records are ordered by trial,
/// then by the order of `args.methods`.
pub fn run_trials(args: &BenchArgs) -> CliResult<Vec<TrialRecord>> {
    if args.trials == 0 {
        return Err("need at least one trial".into());
    }
    if args.methods.is_empty() {
        return Err("need at least one method".into());
    }
    let base = generate(&args.sim.config(args.seed))?;
    let trial = |t: u64| -> Vec<TrialRecord> {
        let seed = args.seed.wrapping_add(t);
        let sim = generate_on(&args.sim.config(seed), base.scheme.clone(), base.train.clone(), base.test.clone());
        let sim = match sim {
            Ok(s) => s,
            Err(e) => {
                return args
                    .methods
                    .iter()
                    .map(|&method| TrialRecord {
                        trial: t,
                        method,
                        result: Err(e.to_string()),
                    })
                    .collect()
            }
        };
        if args.save_trials {
            let path = args.out_dir.join("trials").join(format!("trial_{t:05}.json"));
            let d = Dataset::from_simulation(sim.clone(), Some(args.sim.config(seed)));
            if let Err(e) = write_json(&path, &d.to_file()) {
                log::warn!("could not save {}: {e}", path.display());
            }
        }
        args.methods
            .iter()
            .map(|&method| {
                let result = fit_one(&sim, method, args, seed);
                if let Err(e) = &result {
                    log::warn!("trial {t} {}: {e}", method.name());
                }
                TrialRecord {
                    trial: t,
                    method,
                    result,
                }
            })
            .collect()
    };
    let pool = rayon::ThreadPoolBuilder::new().num_threads(args.jobs.max(1)).build()?;
    let nested: Vec<Vec<TrialRecord>> = pool.install(|| (0..args.trials).into_par_iter().map(trial).collect());
    Ok(nested.into_iter().flatten().collect())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn mean_sd(values: &[f64]) -> (Option<f64>, Option<f64>) {
    let n = values.len();
    if n == 0 {
        return (None, None);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let sd = (n > 1).then(|| (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt());
    (Some(mean), sd)
}

/// Per-trial rows, then `mean` and `sd` rows per method over successful
/// trials; `sd` is blank with fewer than two.
pub fn write_bench_csv(records: &[TrialRecord], methods: &[Method]) -> String {
    let mut out = String::from(BENCH_HEADER);
    out.push('\n');
    for r in records {
        let _ = match &r.result {
            Ok(m) => writeln!(
                out,
                "{},{},ok,{},{},{},{},{},{}",
                r.trial,
                r.method.name(),
                m.evaluation.train_rmse,
                m.evaluation.test_rmse,
                fmt_opt(m.evaluation.emd),
                m.components,
                m.iterations,
                fmt_opt(m.wall_ms)
            ),
            Err(_) => writeln!(out, "{},{},failed,,,,,,", r.trial, r.method.name()),
        };
    }
    for &method in methods {
        let ok: Vec<&TrialMetrics> = records
            .iter()
            .filter(|r| r.method == method)
            .filter_map(|r| r.result.as_ref().ok())
            .collect();
        let columns: [Vec<f64>; 6] = [
            ok.iter().map(|m| m.evaluation.train_rmse).collect(),
            ok.iter().map(|m| m.evaluation.test_rmse).collect(),
            ok.iter().filter_map(|m| m.evaluation.emd).collect(),
            ok.iter().map(|m| m.components as f64).collect(),
            ok.iter().map(|m| m.iterations as f64).collect(),
            ok.iter().filter_map(|m| m.wall_ms).collect(),
        ];
        let stats: Vec<(Option<f64>, Option<f64>)> = columns.iter().map(|c| mean_sd(c)).collect();
        for (label, pick) in [("mean", 0usize), ("sd", 1)] {
            let cells: Vec<String> = stats
                .iter()
                .map(|s| fmt_opt(if pick == 0 { s.0 } else { s.1 }))
                .collect();
            let _ = writeln!(out, "{label},{},n={},{}", method.name(), ok.len(), cells.join(","));
        }
    }
    out
}

pub(crate) fn cmd_bench(args: &BenchArgs, manifest: &mut RunManifest) -> CliResult<Outcome> {
    std::fs::create_dir_all(&args.out_dir)?;
    if args.save_trials {
        std::fs::create_dir_all(args.out_dir.join("trials"))?;
    }
    let records = run_trials(args)?;
    let report = BenchReport {
        csv: write_bench_csv(&records, &args.methods),
        records,
    };
    let path = args.out_dir.join("bench.csv");
    std::fs::write(&path, &report.csv)?;
    manifest.outputs.push(path);
    let failed = report.failures();
    let total = report.records.len();
    manifest.details = json!({ "rows": total, "failed": failed });
    manifest.finish(&args.out_dir.join("manifest.json"))?;
    if failed as f64 > MAX_FAILURE_FRACTION * total as f64 {
        log::error!("{failed} of {total} fits failed");
        Ok(Outcome::TooManyFailures)
    } else {
        Ok(Outcome::Success)
    }
}
