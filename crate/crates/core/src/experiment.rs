//! Seed sweeps over two network variants and their statistical comparison.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::network::{Model, NetworkSpec};
use crate::rng::{derive_seed, RNG_ALGORITHM};
use crate::stats::{mean, sample_variance, welch_t_test, WelchResult};
use crate::train::{EvalConfig, IterationRecord, Trainer};

pub const REPORT_FORMAT_VERSION: u32 = 1;
pub const PIXEL_NORMALIZATION: &str = "x/255";

const EVAL_CHUNK: usize = 500;

/// Fraction of `labels` matched by the row-wise argmax of `predictions`.
pub fn accuracy_of(predictions: &crate::tensor::Tensor, labels: &[usize]) -> Result<f64> {
    if labels.is_empty() {
        return Err(Error::Argument("accuracy of an empty set".into()));
    }
    let (rows, _) = predictions.dims2()?;
    if rows != labels.len() {
        return Err(Error::dim("accuracy", predictions.shape(), &[labels.len()]));
    }
    let hits = predictions
        .argmax_rows()
        .iter()
        .zip(labels)
        .filter(|(p, l)| p == l)
        .count();
    Ok(hits as f64 / labels.len() as f64)
}

/// Classification accuracy of `model` on all of `data`.
pub fn evaluate_accuracy(model: &Model, data: &Dataset) -> Result<f64> {
    evaluate_accuracy_range(model, data, 0, data.len())
}

/// Accuracy on items `start..end`; an empty range is an error.
pub fn evaluate_accuracy_range(model: &Model, data: &Dataset, start: usize, end: usize) -> Result<f64> {
    if start >= end || end > data.len() {
        return Err(Error::Argument(format!(
            "cannot evaluate on items {start}..{end} of a {}-item dataset",
            data.len()
        )));
    }
    let mut hits = 0usize;
    let mut lo = start;
    while lo < end {
        let hi = (lo + EVAL_CHUNK).min(end);
        let idx: Vec<usize> = (lo..hi).collect();
        let (x, _) = data.gather(&idx)?;
        let pred = model.predict(&x)?;
        hits += pred
            .argmax_rows()
            .iter()
            .zip(&data.labels()[lo..hi])
            .filter(|(p, l)| p == l)
            .count();
        lo = hi;
    }
    Ok(hits as f64 / (end - start) as f64)
}

/// `(iteration, test_accuracy)` points of one run, iterations strictly increasing.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AccuracyCurve {
    points: Vec<(u64, f64)>,
}

impl AccuracyCurve {
    pub fn new(points: Vec<(u64, f64)>) -> Result<Self> {
        if let Some(w) = points.windows(2).find(|w| w[1].0 <= w[0].0) {
            return Err(Error::Argument(format!(
                "curve iterations must increase strictly ({} then {})",
                w[0].0, w[1].0
            )));
        }
        if let Some(p) = points.iter().find(|p| !(0.0..=1.0).contains(&p.1)) {
            return Err(Error::Argument(format!(
                "accuracy {} at iteration {} outside [0, 1]",
                p.1, p.0
            )));
        }
        Ok(AccuracyCurve { points })
    }

    pub fn from_log(log: &[IterationRecord]) -> Self {
        AccuracyCurve {
            points: log
                .iter()
                .filter_map(|r| r.test_accuracy.map(|a| (r.iteration, a)))
                .collect(),
        }
    }

    pub fn points(&self) -> &[(u64, f64)] {
        &self.points
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("iteration,accuracy\n");
        for (it, acc) in &self.points {
            out.push_str(&format!("{it},{acc}\n"));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedSummary {
    pub seed: u64,
    /// Mean test accuracy over points with iteration > burn-in.
    pub mean_accuracy: f64,
    pub final_accuracy: f64,
    /// Training wall time; kept out of the serialized report so reports stay
    /// reproducible.
    #[serde(skip)]
    pub wall_time_s: f64,
}

/// Reduces one run's curve to its burn-in-excluded mean accuracy.
pub fn summarize_run(seed: u64, curve: &AccuracyCurve, burn_in: u64) -> Result<SeedSummary> {
    let kept: Vec<f64> = curve
        .points()
        .iter()
        .filter(|(it, _)| *it > burn_in)
        .map(|&(_, a)| a)
        .collect();
    if kept.is_empty() {
        return Err(Error::Argument(format!(
            "no accuracy points after burn_in = {burn_in} (last iteration {:?})",
            curve.points().last().map(|p| p.0)
        )));
    }
    Ok(SeedSummary {
        seed,
        mean_accuracy: mean(&kept),
        final_accuracy: *kept.last().expect("non-empty"),
        wall_time_s: 0.0,
    })
}

/// Everything that defines a comparison apart from the data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonConfig {
    pub labels: [String; 2],
    pub variant_a: NetworkSpec,
    pub variant_b: NetworkSpec,
    pub n_seeds: usize,
    pub master_seed: u64,
    pub burn_in: u64,
    pub eval: EvalConfig,
    /// Same derived seed for seed `i` of both variants (shared W init and batch order).
    pub paired: bool,
    /// Continue with a warning when the variants differ in more than double-weight flags.
    pub allow_spec_mismatch: bool,
}

impl ComparisonConfig {
    /// Seeds for the `n_seeds` runs of variant 0 (A) or 1 (B).
    pub fn seeds(&self, variant: usize) -> Vec<u64> {
        let base = if variant == 1 && !self.paired {
            derive_seed(self.master_seed, u64::MAX)
        } else {
            self.master_seed
        };
        (1..=self.n_seeds as u64).map(|i| derive_seed(base, i)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub master_seed: u64,
    pub n_seeds: usize,
    pub burn_in: u64,
    pub paired: bool,
    pub eval_every: u64,
    pub test_subset: usize,
    pub train_items: usize,
    pub test_items: usize,
    pub normalization: String,
    pub spec_a: NetworkSpec,
    pub spec_b: NetworkSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantSummary {
    pub label: String,
    /// Successful runs, sorted by seed.
    pub seeds: Vec<SeedSummary>,
    /// Seeds whose run hit a non-finite loss.
    pub failed_seeds: Vec<u64>,
    pub mean_accuracy: Option<f64>,
    pub variance: Option<f64>,
}

/// Iteration-wise mean accuracy of each variant over its successful runs.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MeanCurves {
    pub iterations: Vec<u64>,
    pub accuracy_a: Vec<f64>,
    pub accuracy_b: Vec<f64>,
}

impl MeanCurves {
    /// `iteration,accuracy_a,accuracy_b,difference` with difference = b − a.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("iteration,accuracy_a,accuracy_b,difference\n");
        for ((it, a), b) in self.iterations.iter().zip(&self.accuracy_a).zip(&self.accuracy_b) {
            out.push_str(&format!("{it},{a},{b},{}\n", b - a));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub format_version: u32,
    pub rng_algorithm: String,
    pub config: ConfigEcho,
    pub variants: [VariantSummary; 2],
    pub welch: Option<WelchResult>,
    pub sidedness: String,
    /// `mean_b − mean_a`.
    pub mean_difference: Option<f64>,
    pub curves: MeanCurves,
    pub warnings: Vec<String>,
    /// Wall-clock data; written separately from the deterministic report.
    #[serde(skip)]
    pub timing: Timing,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    /// `(seed, seconds)` per successful run, for each variant.
    pub wall_time_s: [Vec<(u64, f64)>; 2],
    pub mean_wall_time_s: [Option<f64>; 2],
    /// Mean wall time of B over mean wall time of A.
    pub time_ratio: Option<f64>,
}

struct RunOutput {
    summary: SeedSummary,
    curve: AccuracyCurve,
}

fn run_one(
    spec: &NetworkSpec,
    seed: u64,
    train: &Dataset,
    test: &Dataset,
    cfg: &ComparisonConfig,
) -> Result<RunOutput> {
    let spec = NetworkSpec { seed, ..spec.clone() };
    let mut trainer = Trainer::new(&spec, train.len())?;
    let mut points = Vec::new();
    trainer.run(train, Some(test), cfg.eval, |r| {
        if let Some(a) = r.test_accuracy {
            points.push((r.iteration, a));
        }
    })?;
    let curve = AccuracyCurve::new(points)?;
    let mut summary = summarize_run(seed, &curve, cfg.burn_in)?;
    summary.wall_time_s = trainer.step_time().as_secs_f64();
    Ok(RunOutput { summary, curve })
}

fn validate(cfg: &ComparisonConfig, warnings: &mut Vec<String>) -> Result<()> {
    if cfg.n_seeds < 2 {
        return Err(Error::invalid(
            "n_seeds",
            format!("at least 2 seeds are needed, got {}", cfg.n_seeds),
        ));
    }
    if cfg.eval.every == 0 || cfg.eval.subset == 0 {
        return Err(Error::invalid(
            "eval",
            "comparisons need a positive eval cadence and subset",
        ));
    }
    cfg.variant_a.validate()?;
    cfg.variant_b.validate()?;
    if !cfg.variant_a.same_apart_from_double_weight(&cfg.variant_b) {
        let msg = "variant specs differ in more than their double-weight flags";
        if !cfg.allow_spec_mismatch {
            return Err(Error::invalid("variant_b", msg));
        }
        warnings.push(msg.to_string());
    }
    for (spec, field) in [(&cfg.variant_a, "variant_a"), (&cfg.variant_b, "variant_b")] {
        if spec.iterations <= cfg.burn_in {
            return Err(Error::invalid(
                format!("{field}.iterations"),
                format!(
                    "{} iterations leave nothing after burn_in {}",
                    spec.iterations, cfg.burn_in
                ),
            ));
        }
    }
    Ok(())
}

fn mean_curve(curves: &[&AccuracyCurve]) -> Option<(Vec<u64>, Vec<f64>)> {
    let first = curves.first()?;
    let its: Vec<u64> = first.points().iter().map(|p| p.0).collect();
    if curves.iter().any(|c| c.points().len() != its.len()) {
        return None;
    }
    let means = (0..its.len())
        .map(|i| curves.iter().map(|c| c.points()[i].1).sum::<f64>() / curves.len() as f64)
        .collect();
    Some((its, means))
}

/// Trains `n_seeds` runs of each variant on a pool of `jobs` threads and compares
/// the burn-in-excluded mean accuracies with a two-sided Welch test.
///
/// Runs that hit a non-finite loss are reported as failed seeds and excluded;
/// any other error aborts the comparison. The report (apart from timing) depends
/// only on the config and data, not on `jobs` or scheduling.
pub fn run_comparison(
    cfg: &ComparisonConfig,
    train: &Dataset,
    test: &Dataset,
    jobs: usize,
) -> Result<ComparisonReport> {
    let mut warnings = Vec::new();
    validate(cfg, &mut warnings)?;
    let specs = [&cfg.variant_a, &cfg.variant_b];
    let tasks: Vec<(usize, u64)> = (0..2)
        .flat_map(|v| cfg.seeds(v).into_iter().map(move |s| (v, s)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::State(format!("cannot start worker pool: {e}")))?;
    let results: Vec<(usize, u64, Result<RunOutput>)> = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(v, seed)| (v, seed, run_one(specs[v], seed, train, test, cfg)))
            .collect()
    });

    let mut per_variant: [Vec<(SeedSummary, AccuracyCurve)>; 2] = Default::default();
    let mut failed: [Vec<u64>; 2] = Default::default();
    for (v, seed, result) in results {
        match result {
            Ok(out) => per_variant[v].push((out.summary, out.curve)),
            Err(Error::NonFinite { .. }) => failed[v].push(seed),
            Err(e) => return Err(e),
        }
    }
    for v in 0..2 {
        per_variant[v].sort_by_key(|(s, _)| s.seed);
        failed[v].sort_unstable();
        if !failed[v].is_empty() {
            warnings.push(format!(
                "{}: {} of {} runs failed with a non-finite loss",
                cfg.labels[v],
                failed[v].len(),
                cfg.n_seeds
            ));
        }
    }

    let accs: [Vec<f64>; 2] = core::array::from_fn(|v| per_variant[v].iter().map(|(s, _)| s.mean_accuracy).collect());
    let variants: [VariantSummary; 2] = core::array::from_fn(|v| VariantSummary {
        label: cfg.labels[v].clone(),
        seeds: per_variant[v].iter().map(|(s, _)| s.clone()).collect(),
        failed_seeds: failed[v].clone(),
        mean_accuracy: (!accs[v].is_empty()).then(|| mean(&accs[v])),
        variance: (accs[v].len() >= 2).then(|| sample_variance(&accs[v])),
    });
    let welch = if accs.iter().all(|a| a.len() >= 2) {
        match welch_t_test(&accs[0], &accs[1]) {
            Ok(w) => Some(w),
            Err(e) => {
                warnings.push(format!("Welch test not computed: {e}"));
                None
            }
        }
    } else {
        warnings.push("Welch test not computed: fewer than 2 successful runs in a variant".into());
        None
    };
    let mean_difference = match (variants[0].mean_accuracy, variants[1].mean_accuracy) {
        (Some(a), Some(b)) => Some(b - a),
        _ => None,
    };

    let curves_of = |v: usize| per_variant[v].iter().map(|(_, c)| c).collect::<Vec<_>>();
    let curves = match (mean_curve(&curves_of(0)), mean_curve(&curves_of(1))) {
        (Some((ia, a)), Some((ib, b))) if ia == ib => MeanCurves {
            iterations: ia,
            accuracy_a: a,
            accuracy_b: b,
        },
        _ => MeanCurves::default(),
    };

    let wall: [Vec<(u64, f64)>; 2] =
        core::array::from_fn(|v| per_variant[v].iter().map(|(s, _)| (s.seed, s.wall_time_s)).collect());
    let mean_wall: [Option<f64>; 2] = core::array::from_fn(|v| {
        (!wall[v].is_empty()).then(|| wall[v].iter().map(|w| w.1).sum::<f64>() / wall[v].len() as f64)
    });
    let time_ratio = match mean_wall {
        [Some(a), Some(b)] if a > 0.0 => Some(b / a),
        _ => None,
    };

    Ok(ComparisonReport {
        format_version: REPORT_FORMAT_VERSION,
        rng_algorithm: RNG_ALGORITHM.to_string(),
        config: ConfigEcho {
            master_seed: cfg.master_seed,
            n_seeds: cfg.n_seeds,
            burn_in: cfg.burn_in,
            paired: cfg.paired,
            eval_every: cfg.eval.every,
            test_subset: cfg.eval.subset.min(test.len()),
            train_items: train.len(),
            test_items: test.len(),
            normalization: PIXEL_NORMALIZATION.to_string(),
            spec_a: cfg.variant_a.clone(),
            spec_b: cfg.variant_b.clone(),
        },
        variants,
        welch,
        sidedness: "two-sided".into(),
        mean_difference,
        curves,
        warnings,
        timing: Timing {
            wall_time_s: wall,
            mean_wall_time_s: mean_wall,
            time_ratio,
        },
    })
}

/// Equal-width histogram bins spanning `[min, max]` of `values`, as
/// `(lower, upper, count)`; the last bin is closed on the right.
pub fn histogram(values: &[f64], bins: usize) -> Result<Vec<(f64, f64, usize)>> {
    if values.is_empty() {
        return Err(Error::Argument("histogram needs at least one value".into()));
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    histogram_in(values, lo, hi, bins)
}

/// As [`histogram`] with fixed edges `[lo, hi]`, so several samples can share
/// bins. Values outside the range are not counted.
pub fn histogram_in(values: &[f64], lo: f64, hi: f64, bins: usize) -> Result<Vec<(f64, f64, usize)>> {
    if bins == 0 || !lo.is_finite() || !hi.is_finite() || lo > hi {
        return Err(Error::Argument(format!(
            "bad histogram range [{lo}, {hi}] with {bins} bins"
        )));
    }
    if lo == hi {
        return Ok(vec![(lo, hi, values.iter().filter(|&&v| v == lo).count())]);
    }
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for &v in values.iter().filter(|&&v| (lo..=hi).contains(&v)) {
        let k = (((v - lo) / width) as usize).min(bins - 1);
        counts[k] += 1;
    }
    Ok(counts
        .into_iter()
        .enumerate()
        .map(|(k, c)| {
            let upper = if k + 1 == bins { hi } else { lo + width * (k + 1) as f64 };
            (lo + width * k as f64, upper, c)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tensor;

    fn curve(points: &[(u64, f64)]) -> AccuracyCurve {
        AccuracyCurve::new(points.to_vec()).unwrap()
    }

    #[test]
    fn burn_in_mean() {
        let c = curve(&[(1000, 0.0), (2000, 0.8), (3000, 0.9)]);
        let s = summarize_run(7, &c, 1500).unwrap();
        assert!((s.mean_accuracy - 0.85).abs() < 1e-15);
        assert_eq!(s.final_accuracy, 0.9);
        let flat = curve(&[(1, 0.9), (2, 0.9), (3, 0.9)]);
        for b in 0..3 {
            assert_eq!(summarize_run(0, &flat, b).unwrap().mean_accuracy, 0.9);
        }
        let err = summarize_run(0, &c, 3000).unwrap_err();
        assert!(err.to_string().contains("burn_in = 3000"));
    }

    #[test]
    fn curves_must_increase() {
        assert!(AccuracyCurve::new(vec![(2, 0.5), (2, 0.6)]).is_err());
        assert!(AccuracyCurve::new(vec![(3, 0.5), (2, 0.6)]).is_err());
        assert!(AccuracyCurve::new(vec![(1, 1.5)]).is_err());
    }

    #[test]
    fn accuracy_counts() {
        let p = Tensor::from_rows(&[&[0.9, 0.1], &[0.2, 0.8], &[0.6, 0.4], &[0.3, 0.7]]);
        assert_eq!(accuracy_of(&p, &[0, 1, 0, 1]).unwrap(), 1.0);
        assert_eq!(accuracy_of(&p, &[0, 1, 1, 0]).unwrap(), 0.5);
        assert!(accuracy_of(&p, &[]).is_err());
    }

    #[test]
    fn histogram_covers_range() {
        let v = [0.91, 0.93, 0.95, 0.92, 0.97];
        let h = histogram(&v, 4).unwrap();
        assert_eq!(h.first().unwrap().0, 0.91);
        assert_eq!(h.last().unwrap().1, 0.97);
        assert_eq!(h.iter().map(|b| b.2).sum::<usize>(), 5);
        assert_eq!(histogram(&[0.5, 0.5], 3).unwrap(), vec![(0.5, 0.5, 2)]);
        assert!(histogram(&[], 3).is_err());
        let shared = histogram_in(&[0.1, 0.9, 2.0], 0.0, 1.0, 2).unwrap();
        assert_eq!(shared, vec![(0.0, 0.5, 1), (0.5, 1.0, 1)]);
    }

    #[test]
    fn paired_and_unpaired_seeds() {
        let spec = NetworkSpec::mnist_fnn(false);
        let mut cfg = ComparisonConfig {
            labels: ["a".into(), "b".into()],
            variant_a: spec.clone(),
            variant_b: spec.with_double_weight(true),
            n_seeds: 3,
            master_seed: 9,
            burn_in: 0,
            eval: EvalConfig::default(),
            paired: true,
            allow_spec_mismatch: false,
        };
        assert_eq!(cfg.seeds(0), cfg.seeds(1));
        cfg.paired = false;
        assert!(cfg.seeds(0).iter().all(|s| !cfg.seeds(1).contains(s)));
    }
}
