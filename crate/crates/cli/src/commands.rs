use std::io::Write;
use std::path::PathBuf;

use ebp_core::io::{load_dataset, load_model, write_json, Dataset, MetricsFile, ModelFile};
use ebp_core::methods::fit_voxel;
use ebp_core::metrics::{evaluate, Evaluation};
use ebp_core::simulate::{generate, make_directions, repulsion_energy};
use serde_json::json;

use crate::manifest::manifest_path;
use crate::{CliResult, DirectionsArgs, EvaluateArgs, FitArgs, MetricsFormat, RunManifest, SimulateArgs};

pub fn cmd_simulate(args: &SimulateArgs, manifest: &mut RunManifest) -> CliResult<Dataset> {
    let cfg = args.sim.config(args.seed);
    let dataset = Dataset::from_simulation(generate(&cfg)?, Some(cfg));
    write_json(&args.out, &dataset.to_file())?;
    manifest.outputs.push(args.out.clone());
    manifest.finish(&manifest_path(&args.out))?;
    Ok(dataset)
}

pub fn cmd_fit(args: &FitArgs, manifest: &mut RunManifest) -> CliResult<ModelFile> {
    let dataset = load_dataset(&args.input)?;
    let cfg = args.method_args.config(args.seed);
    let out = fit_voxel(args.method, &dataset.train_scheme(), &dataset.train_signal(), &cfg)?;
    let file = ModelFile::from_fitted(args.method, &out.model);
    write_json(&args.out, &file)?;
    manifest.outputs.push(args.out.clone());
    if let Some(trace) = &out.trace {
        let path = args
            .trace
            .clone()
            .unwrap_or_else(|| args.out.with_extension("trace.csv"));
        std::fs::write(&path, trace.to_csv())?;
        manifest.outputs.push(path);
    }
    manifest.details = json!({
        "components": out.model.components(),
        "iterations": out.iterations,
        "regularization": out.regularization,
        "cross_validation": out.cv,
        "stop_reason": out.trace.as_ref().map(|t| t.stop_reason),
        "wall_ms": if cfg.timing { Some(out.wall_ms) } else { None },
    });
    log::info!(
        "{}: {} components after {} iterations",
        args.method.name(),
        out.model.components(),
        out.iterations
    );
    manifest.finish(&manifest_path(&args.out))?;
    Ok(file)
}

pub fn cmd_evaluate(args: &EvaluateArgs, manifest: &mut RunManifest) -> CliResult<Evaluation> {
    let model = load_model(&args.model)?;
    let d = load_dataset(&args.dataset)?;
    let eval = evaluate(&model, &d.signal, &d.scheme, &d.train, &d.test, d.truth.as_ref())?;
    let text = match args.format {
        MetricsFormat::Json => ebp_core::io::to_json(&MetricsFile::from(eval))?,
        MetricsFormat::Csv => {
            let emd = eval.emd.map(|v| v.to_string()).unwrap_or_default();
            format!("train_rmse,test_rmse,emd\n{},{},{}\n", eval.train_rmse, eval.test_rmse, emd)
        }
    };
    match &args.out {
        Some(path) => {
            std::fs::write(path, text)?;
            manifest.outputs.push(path.clone());
            manifest.finish(&manifest_path(path))?;
        }
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(eval)
}

pub fn cmd_directions(args: &DirectionsArgs, manifest: &mut RunManifest) -> CliResult<PathBuf> {
    let dirs = make_directions(args.n, args.seed)?;
    let mut text = String::from("x,y,z\n");
    for d in &dirs {
        text.push_str(&format!("{},{},{}\n", d.x, d.y, d.z));
    }
    std::fs::write(&args.out, text)?;
    manifest.outputs.push(args.out.clone());
    manifest.details = json!({ "energy": repulsion_energy(&dirs) });
    manifest.finish(&manifest_path(&args.out))?;
    Ok(args.out.clone())
}

