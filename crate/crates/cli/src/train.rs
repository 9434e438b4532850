//! `dwnet train`: one run, written as `curve.csv`, `log.csv`, `model.ckpt`,
//! `summary.json` and `timing.json`.

use dwnet::experiment::PIXEL_NORMALIZATION;
use dwnet::rng::RNG_ALGORITHM;
use dwnet::train::write_log_csv;
use dwnet::{build_network, summarize_run, AccuracyCurve, EvalConfig, NetworkSpec, Trainer};
use serde::Serialize;

use crate::{output_dir, resolve_config, to_json, write_file, CliError, RunArgs};

pub const SUMMARY_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize)]
pub struct ParameterInfo {
    pub name: String,
    pub shape: Vec<usize>,
}

/// Everything needed to reproduce the run, plus its outcome. Deterministic.
#[derive(Debug, Serialize)]
pub struct RunSummary {
    pub format_version: u32,
    pub rng_algorithm: String,
    pub spec: NetworkSpec,
    pub parameters: Vec<ParameterInfo>,
    pub train_items: usize,
    pub test_items: usize,
    pub normalization: String,
    pub eval: EvalConfig,
    pub burn_in: u64,
    pub iterations: u64,
    pub final_train_loss: Option<f64>,
    pub final_accuracy: Option<f64>,
    /// Mean test accuracy over evaluations after `burn_in`.
    pub mean_accuracy: Option<f64>,
}

fn parameters(spec: &NetworkSpec) -> Result<Vec<ParameterInfo>, CliError> {
    let model = build_network(spec).map_err(CliError::runtime)?;
    Ok(model
        .parameters()
        .into_iter()
        .map(|(name, t)| ParameterInfo {
            name,
            shape: t.shape().to_vec(),
        })
        .collect())
}

fn print_spec(spec: &NetworkSpec, params: &[ParameterInfo]) {
    println!(
        "input {:?}, loss {:?}, {} iterations",
        spec.input_shape, spec.loss, spec.iterations
    );
    for p in params {
        println!("  {:<16} {:?}", p.name, p.shape);
    }
}

pub fn run(args: &RunArgs) -> Result<(), CliError> {
    let cfg = resolve_config(args.config.as_deref(), args.preset.as_deref())?;
    cfg.validate()?;
    let mut spec = cfg.spec(args.double_weight)?;
    if args.double_weight {
        spec = spec.with_double_weight(true);
    }
    let params = parameters(&spec)?;
    print_spec(&spec, &params);
    if args.dry_run {
        println!("{}", to_json(&spec).trim_end());
        return Ok(());
    }
    let (train, test) = cfg.load_data()?;
    let out = output_dir(args.out.as_deref(), &cfg)?;
    let eval = cfg.eval();

    let mut trainer = Trainer::new(&spec, train.len()).map_err(CliError::runtime)?;
    let mut log = Vec::with_capacity(spec.iterations as usize);
    trainer
        .run(&train, Some(&test), eval, |r| log.push(*r))
        .map_err(CliError::runtime)?;
    let curve = AccuracyCurve::from_log(&log);
    let burn_in = cfg.experiment.burn_in;
    let mean_accuracy = summarize_run(spec.seed, &curve, burn_in).ok().map(|s| s.mean_accuracy);

    let summary = RunSummary {
        format_version: SUMMARY_FORMAT_VERSION,
        rng_algorithm: RNG_ALGORITHM.to_string(),
        spec: spec.clone(),
        parameters: params,
        train_items: train.len(),
        test_items: test.len(),
        normalization: PIXEL_NORMALIZATION.to_string(),
        eval,
        burn_in,
        iterations: trainer.iteration(),
        final_train_loss: log.last().map(|r| r.train_loss),
        final_accuracy: curve.points().last().map(|p| p.1),
        mean_accuracy,
    };
    write_file(&out, "curve.csv", curve.to_csv())?;
    write_log_csv(&out.join("log.csv"), &log).map_err(CliError::runtime)?;
    trainer
        .checkpoint()
        .save(out.join("model.ckpt"))
        .map_err(CliError::runtime)?;
    write_file(&out, "summary.json", to_json(&summary))?;
    let timing = serde_json::json!({ "wall_time_s": trainer.step_time().as_secs_f64() });
    write_file(&out, "timing.json", to_json(&timing))?;

    match (summary.final_accuracy, summary.mean_accuracy) {
        (Some(f), Some(m)) => println!("final accuracy {f:.4}, mean after burn-in {m:.4}"),
        (Some(f), None) => println!("final accuracy {f:.4}"),
        _ => println!("no test evaluations"),
    }
    println!("wrote {}", out.display());
    Ok(())
}
