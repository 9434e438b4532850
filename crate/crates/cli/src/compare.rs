//! `dwnet compare`: the seed sweep. Writes `report.json` (deterministic),
//! `timing.json`, `seeds.csv` and `curves.csv`, and prints the summary table.

use dwnet::experiment::Timing;
use dwnet::{run_comparison, ComparisonConfig, ComparisonReport};

use crate::report::render_table;
use crate::{output_dir, resolve_config, to_json, write_file, CliError, CompareArgs};

pub fn default_jobs() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

/// One row per run: `variant,label,seed,mean_accuracy,final_accuracy,status`.
pub fn seeds_csv(report: &ComparisonReport) -> String {
    let mut out = String::from("variant,label,seed,mean_accuracy,final_accuracy,status\n");
    for (v, name) in ["a", "b"].iter().enumerate() {
        let summary = &report.variants[v];
        for s in &summary.seeds {
            out.push_str(&format!(
                "{name},{},{},{},{},ok\n",
                summary.label, s.seed, s.mean_accuracy, s.final_accuracy
            ));
        }
        for seed in &summary.failed_seeds {
            out.push_str(&format!("{name},{},{seed},,,non-finite\n", summary.label));
        }
    }
    out
}

pub fn run(args: &CompareArgs) -> Result<(), CliError> {
    let mut cfg = resolve_config(args.config.as_deref(), args.preset.as_deref())?;
    if let Some(n) = args.seeds {
        cfg.experiment.n_seeds = n;
    }
    if args.unpaired {
        cfg.experiment.paired = false;
    }
    cfg.validate()?;
    if cfg.experiment.n_seeds < 2 {
        return Err(CliError::Usage(format!(
            "config field `experiment.n_seeds`: a comparison needs at least 2 seeds, got {}",
            cfg.experiment.n_seeds
        )));
    }
    let jobs = args.jobs.unwrap_or_else(default_jobs);
    if jobs == 0 {
        return Err(CliError::Usage("--jobs must be at least 1".into()));
    }
    let base = cfg.spec(false)?;
    let e = &cfg.experiment;
    let comparison = ComparisonConfig {
        labels: e.labels.clone(),
        variant_a: base.clone().with_double_weight(false),
        variant_b: base.with_double_weight(true),
        n_seeds: e.n_seeds,
        master_seed: e.master_seed,
        burn_in: e.burn_in,
        eval: cfg.eval(),
        paired: e.paired,
        allow_spec_mismatch: e.allow_spec_mismatch,
    };
    let (train, test) = cfg.load_data()?;
    let out = output_dir(args.out.as_deref(), &cfg)?;
    let report = run_comparison(&comparison, &train, &test, jobs).map_err(CliError::runtime)?;

    write_file(&out, "report.json", to_json(&report))?;
    write_file(&out, "timing.json", to_json(&report.timing))?;
    write_file(&out, "seeds.csv", seeds_csv(&report))?;
    write_file(&out, "curves.csv", report.curves.to_csv())?;
    print!("{}", render_table(&report, Some(&report.timing)));
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    println!("wrote {}", out.display());
    Ok(())
}

/// Reads a `timing.json` written next to a report, if present.
pub fn read_timing(path: &std::path::Path) -> Option<Timing> {
    let text = std::fs::read_to_string(path).ok()?;
    serde_json::from_str(&text).ok()
}
