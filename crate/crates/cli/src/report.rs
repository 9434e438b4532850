//! `dwnet report`: a text table, `histogram.csv` (shared bins over both
//! variants' per-seed mean accuracies) and `curves.csv`.

use std::fmt::Write as _;

use dwnet::experiment::{histogram_in, Timing};
use dwnet::ComparisonReport;

use crate::compare::read_timing;
use crate::{write_file, CliError, ReportArgs};

fn opt(v: Option<f64>, width: usize, prec: usize) -> String {
    match v {
        Some(x) => format!("{x:>width$.prec$}"),
        None => format!("{:>width$}", "-"),
    }
}

/// One row per variant, then the test statistics.
pub fn render_table(report: &ComparisonReport, timing: Option<&Timing>) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<16} {:>6} {:>7} {:>10} {:>10} {:>12}",
        "variant", "runs", "failed", "mean acc", "std dev", "wall time s"
    );
    for (v, summary) in report.variants.iter().enumerate() {
        let wall = timing.and_then(|t| t.mean_wall_time_s[v]);
        let _ = writeln!(
            s,
            "{:<16} {:>6} {:>7} {} {} {}",
            summary.label,
            summary.seeds.len(),
            summary.failed_seeds.len(),
            opt(summary.mean_accuracy, 10, 4),
            opt(summary.variance.map(f64::sqrt), 10, 4),
            opt(wall, 12, 3),
        );
    }
    let _ = writeln!(
        s,
        "difference (b - a) {}",
        opt(report.mean_difference, 10, 4).trim_start()
    );
    match &report.welch {
        Some(w) => {
            let _ = writeln!(
                s,
                "Welch t {:.4}  df {:.2}  p {:.3e} ({})",
                w.t, w.df, w.p_value, report.sidedness
            );
        }
        None => {
            let _ = writeln!(s, "Welch test not available");
        }
    }
    let _ = writeln!(
        s,
        "time ratio (b / a) {}",
        opt(timing.and_then(|t| t.time_ratio), 6, 3).trim_start()
    );
    s
}

/// `bin_lower,bin_upper,count_a,count_b` over `[min, max]` of all per-seed means.
pub fn histogram_csv(report: &ComparisonReport, bins: usize) -> Result<String, CliError> {
    let values: [Vec<f64>; 2] =
        core::array::from_fn(|v| report.variants[v].seeds.iter().map(|s| s.mean_accuracy).collect());
    let all: Vec<f64> = values.iter().flatten().copied().collect();
    if all.is_empty() {
        return Err(CliError::Usage("report has no successful seeds to summarize".into()));
    }
    let lo = all.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = all.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let a = histogram_in(&values[0], lo, hi, bins).map_err(|e| CliError::Usage(e.to_string()))?;
    let b = histogram_in(&values[1], lo, hi, bins).map_err(|e| CliError::Usage(e.to_string()))?;
    let mut out = String::from("bin_lower,bin_upper,count_a,count_b\n");
    for ((l, u, ca), (_, _, cb)) in a.into_iter().zip(b) {
        out.push_str(&format!("{l},{u},{ca},{cb}\n"));
    }
    Ok(out)
}

pub fn run(args: &ReportArgs) -> Result<(), CliError> {
    let text = std::fs::read_to_string(&args.report)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", args.report.display())))?;
    let report: ComparisonReport = serde_json::from_str(&text)
        .map_err(|e| CliError::Usage(format!("{} is not a comparison report: {e}", args.report.display())))?;
    if args.bins == 0 {
        return Err(CliError::Usage("--bins must be at least 1".into()));
    }
    let dir = args.report.parent().map(|p| p.to_path_buf()).unwrap_or_default();
    let timing = read_timing(&dir.join("timing.json"));
    let histogram = histogram_csv(&report, args.bins)?;
    let out = match &args.out {
        Some(o) => {
            std::fs::create_dir_all(o).map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", o.display())))?;
            o.clone()
        }
        None => dir,
    };
    let table = render_table(&report, timing.as_ref());
    write_file(&out, "histogram.csv", histogram)?;
    write_file(&out, "curves.csv", report.curves.to_csv())?;
    write_file(&out, "table.txt", &table)?;
    print!("{table}");
    Ok(())
}
