//! The `dwnet` command line: `train`, `compare`, `gradcheck` and `report`.
//!
//! Exit codes: 0 on success, 1 when a run fails (or a gradient check does not
//! pass), 2 for usage and configuration errors.

pub mod compare;
pub mod config;
pub mod gradcheck;
pub mod report;
pub mod train;

use std::fmt;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

pub use config::RunConfig;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }

    /// Maps a library error: spec validation problems are configuration errors,
    /// everything else is a runtime failure.
    pub fn runtime(e: dwnet::Error) -> Self {
        match e {
            dwnet::Error::Validation { .. } | dwnet::Error::TooManyParameters { .. } => CliError::Usage(e.to_string()),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Runtime(m) => f.write_str(m),
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "dwnet",
    version,
    about = "Train and compare standard and double-weight networks"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train one network and write its curve, log, checkpoint and summary.
    Train(RunArgs),
    /// Train both variants over many seeds and compare them with a Welch test.
    Compare(CompareArgs),
    /// Check the analytic gradients of a (scaled) preset against finite differences.
    Gradcheck(GradcheckArgs),
    /// Render a comparison report as a table plus histogram and curve CSVs.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// JSON run configuration.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Architecture preset; replaces the config's network section.
    #[arg(long, value_name = "NAME")]
    pub preset: Option<String>,
    /// Use double-weight dense layers.
    #[arg(long)]
    pub double_weight: bool,
    /// Output directory (overrides the config).
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Print the resolved network and exit without training.
    #[arg(long)]
    pub dry_run: bool,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    #[arg(long, value_name = "NAME")]
    pub preset: Option<String>,
    /// Number of seeds per variant (overrides the config).
    #[arg(long, value_name = "N")]
    pub seeds: Option<usize>,
    /// Worker threads; defaults to the number of available cores.
    #[arg(long, value_name = "N")]
    pub jobs: Option<usize>,
    /// Draw the two variants' seeds independently instead of pairing them.
    #[arg(long)]
    pub unpaired: bool,
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    #[arg(long, value_name = "NAME")]
    pub preset: String,
    /// Shrink factor in (0, 1] for widths, depths and input size.
    #[arg(long, default_value_t = 1.0)]
    pub scale: f64,
    #[arg(long)]
    pub double_weight: bool,
    /// Replace the hidden dense widths, e.g. `20,10`.
    #[arg(long, value_delimiter = ',', value_name = "W,..")]
    pub hidden_widths: Option<Vec<usize>>,
    /// Finite-difference step; by default chosen from the architecture.
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long, default_value_t = 4)]
    pub batch: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Perturb the analytic gradients before comparing (negative control).
    #[arg(long, hide = true)]
    pub corrupt_backward: bool,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// A `report.json` written by `compare`.
    pub report: PathBuf,
    /// Where to write the CSVs; defaults to the report's directory.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = 20)]
    pub bins: usize,
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Train(a) => train::run(&a),
        Command::Compare(a) => compare::run(&a),
        Command::Gradcheck(a) => gradcheck::run(&a),
        Command::Report(a) => report::run(&a),
    }
}

/// Resolves the config for `train`/`compare` from `--config` and `--preset`.
pub(crate) fn resolve_config(config: Option<&Path>, preset: Option<&str>) -> Result<RunConfig, CliError> {
    let mut cfg = match (config, preset) {
        (Some(path), _) => RunConfig::load(path)?,
        (None, Some(p)) => RunConfig::for_preset(p),
        (None, None) => return Err(CliError::Usage("give --config PATH or --preset NAME".into())),
    };
    if let (Some(_), Some(p)) = (config, preset) {
        cfg.network = config::NetworkConfig {
            preset: Some(p.to_string()),
            ..Default::default()
        };
    }
    Ok(cfg)
}

pub(crate) fn output_dir(flag: Option<&Path>, cfg: &RunConfig) -> Result<PathBuf, CliError> {
    let dir = flag
        .map(Path::to_path_buf)
        .or_else(|| cfg.out.clone())
        .ok_or_else(|| CliError::Usage("no output directory: set `out` in the config or pass --out".into()))?;
    std::fs::create_dir_all(&dir).map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", dir.display())))?;
    Ok(dir)
}

pub(crate) fn write_file(dir: &Path, name: &str, contents: impl AsRef<[u8]>) -> Result<PathBuf, CliError> {
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))?;
    Ok(path)
}

pub(crate) fn to_json(value: &impl serde::Serialize) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report types serialize");
    s.push('\n');
    s
}
