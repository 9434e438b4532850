//! The JSON run configuration shared by `train` and `compare`.
//!
//! ```json
//! {
//!   "version": 1,
//!   "dataset": { "kind": "mnist", "dir": "../data/mnist-desk" },
//!   "network": { "preset": "mnist-fnn", "hidden_widths": [50, 30], "iterations": 2000 },
//!   "experiment": { "n_seeds": 10, "master_seed": 1, "burn_in": 500, "eval_every": 10 },
//!   "out": "runs/desk"
//! }
//! ```
//!
//! Relative paths are resolved against the directory holding the config file.

use std::path::{Path, PathBuf};

use dwnet::data::cifar::load_cifar10_dir;
use dwnet::data::idx::load_mnist_dir;
use dwnet::data::make_toy_dataset;
use dwnet::rng::streams;
use dwnet::{derive_seed, Dataset, EvalConfig, InitSpec, NetworkSpec, OptimizerSpec, Rng, Split, ToyKind};
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const CONFIG_VERSION: u32 = 1;
pub const DATA_DIR_ENV: &str = "DWNET_DATA_DIR";

const MAX_SEEDS: usize = 100_000;
const MAX_ITERATIONS: u64 = 10_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub version: u32,
    pub dataset: DatasetConfig,
    pub network: NetworkConfig,
    #[serde(default)]
    pub experiment: ExperimentConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetConfig {
    /// IDX files (`train-images-idx3-ubyte[.gz]` and friends) in `dir`.
    Mnist {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        dir: Option<PathBuf>,
        /// Use only the first `train_items` training images.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        train_items: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        test_items: Option<usize>,
    },
    /// `data_batch_{1..5}.bin` and `test_batch.bin` in `dir`.
    Cifar10 {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        dir: Option<PathBuf>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        train_items: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        test_items: Option<usize>,
    },
    /// Synthetic 2-D points, drawn from the master seed.
    Toy {
        shape: ToyKind,
        train_items: usize,
        test_items: usize,
    },
}

/// Either a preset with overrides, or a complete spec.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spec: Option<NetworkSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub double_weight: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hidden_widths: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub learning_rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub batch_size: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iterations: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub optimizer: Option<OptimizerSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub init: Option<InitSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub n_seeds: usize,
    pub master_seed: u64,
    /// Accuracy points at or before this iteration are left out of run means.
    pub burn_in: u64,
    pub eval_every: u64,
    pub test_subset: usize,
    pub paired: bool,
    pub labels: [String; 2],
    pub allow_spec_mismatch: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            n_seeds: 2,
            master_seed: 0,
            burn_in: 0,
            eval_every: 10,
            test_subset: 1000,
            paired: true,
            labels: ["standard".into(), "double-weight".into()],
            allow_spec_mismatch: false,
        }
    }
}

fn invalid(field: &str, reason: impl std::fmt::Display) -> CliError {
    CliError::Usage(format!("config field `{field}`: {reason}"))
}

impl RunConfig {
    /// Reads and validates a config file, resolving relative paths against its directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: RunConfig =
            serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    /// A config for `preset` with its natural dataset: the toy set for `toy`,
    /// otherwise files under `$DWNET_DATA_DIR`.
    pub fn for_preset(preset: &str) -> Self {
        let dataset = match preset {
            "toy" => DatasetConfig::Toy {
                shape: ToyKind::TwoGaussians,
                train_items: 400,
                test_items: 400,
            },
            "cifar10-cnn" => DatasetConfig::Cifar10 {
                dir: None,
                train_items: None,
                test_items: None,
            },
            _ => DatasetConfig::Mnist {
                dir: None,
                train_items: None,
                test_items: None,
            },
        };
        RunConfig {
            version: CONFIG_VERSION,
            dataset,
            network: NetworkConfig {
                preset: Some(preset.to_string()),
                ..NetworkConfig::default()
            },
            experiment: ExperimentConfig::default(),
            out: None,
        }
    }

    fn resolve_paths(&mut self, base: &Path) {
        let join = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let DatasetConfig::Mnist { dir: Some(d), .. } | DatasetConfig::Cifar10 { dir: Some(d), .. } =
            &mut self.dataset
        {
            join(d);
        }
        if let Some(out) = &mut self.out {
            join(out);
        }
    }

    /// Checks everything that can be checked without touching the data.
    pub fn validate(&self) -> Result<(), CliError> {
        if self.version != CONFIG_VERSION {
            return Err(invalid(
                "version",
                format!("unsupported version {}, expected {CONFIG_VERSION}", self.version),
            ));
        }
        let e = &self.experiment;
        if e.eval_every == 0 {
            return Err(invalid("experiment.eval_every", "must be at least 1"));
        }
        if e.test_subset == 0 {
            return Err(invalid("experiment.test_subset", "must be at least 1"));
        }
        if e.n_seeds > MAX_SEEDS {
            return Err(invalid("experiment.n_seeds", format!("at most {MAX_SEEDS}")));
        }
        match &self.dataset {
            DatasetConfig::Toy {
                train_items,
                test_items,
                ..
            } => {
                if *train_items < 4 || *test_items < 4 {
                    return Err(invalid("dataset.train_items", "toy sets need at least 4 items each"));
                }
            }
            DatasetConfig::Mnist {
                train_items,
                test_items,
                ..
            }
            | DatasetConfig::Cifar10 {
                train_items,
                test_items,
                ..
            } => {
                if *train_items == Some(0) {
                    return Err(invalid("dataset.train_items", "must be positive"));
                }
                if *test_items == Some(0) {
                    return Err(invalid("dataset.test_items", "must be positive"));
                }
            }
        }
        let spec = self.spec(false)?;
        if spec.iterations > MAX_ITERATIONS {
            return Err(invalid("network.iterations", format!("at most {MAX_ITERATIONS}")));
        }
        Ok(())
    }

    /// The network for this config; `double_weight` is the flag for presets when
    /// the config does not pin it.
    pub fn spec(&self, double_weight: bool) -> Result<NetworkSpec, CliError> {
        let n = &self.network;
        let spec = match (&n.preset, &n.spec) {
            (Some(_), Some(_)) => return Err(invalid("network", "give either `preset` or `spec`, not both")),
            (None, None) => return Err(invalid("network", "one of `preset` or `spec` is required")),
            (None, Some(spec)) => {
                let overridden = n.double_weight.is_some()
                    || n.hidden_widths.is_some()
                    || n.learning_rate.is_some()
                    || n.batch_size.is_some()
                    || n.iterations.is_some()
                    || n.optimizer.is_some()
                    || n.init.is_some();
                if overridden {
                    return Err(invalid(
                        "network",
                        "overrides only apply to presets; edit `spec` directly",
                    ));
                }
                spec.clone()
            }
            (Some(name), None) => {
                let dw = n.double_weight.unwrap_or(double_weight);
                let mut spec = NetworkSpec::preset(name, dw).map_err(|e| invalid("network.preset", e))?;
                if let Some(w) = &n.hidden_widths {
                    spec = spec
                        .with_hidden_widths(w)
                        .map_err(|e| invalid("network.hidden_widths", e))?;
                }
                if let Some(v) = n.learning_rate {
                    spec.learning_rate = v;
                }
                if let Some(v) = n.batch_size {
                    spec.batch_size = v;
                }
                if let Some(v) = n.iterations {
                    spec.iterations = v;
                }
                if let Some(v) = n.optimizer {
                    spec.optimizer = v;
                }
                if let Some(v) = n.init {
                    spec.init = v;
                }
                // a single run uses the seed of run 1 in a comparison
                spec.seed = derive_seed(self.experiment.master_seed, 1);
                spec
            }
        };
        spec.validate()
            .map_err(|e| CliError::Usage(format!("config field `network`: {e}")))?;
        Ok(spec)
    }

    pub fn eval(&self) -> EvalConfig {
        EvalConfig {
            every: self.experiment.eval_every,
            subset: self.experiment.test_subset,
        }
    }

    /// Loads (or generates) the training and test sets.
    pub fn load_data(&self) -> Result<(Dataset, Dataset), CliError> {
        match &self.dataset {
            DatasetConfig::Toy {
                shape,
                train_items,
                test_items,
            } => {
                let mut rng = Rng::with_stream(self.experiment.master_seed, streams::DATA);
                let train = make_toy_dataset(&mut rng, *train_items, *shape).map_err(CliError::runtime)?;
                let test = make_toy_dataset(&mut rng, *test_items, *shape).map_err(CliError::runtime)?;
                Ok((train, test.with_split(Split::Test)))
            }
            DatasetConfig::Mnist {
                dir,
                train_items,
                test_items,
            } => {
                let dir = data_dir(dir.as_deref(), &["mnist"])?;
                let train = load_mnist_dir(&dir, Split::Train).map_err(CliError::runtime)?;
                let test = load_mnist_dir(&dir, Split::Test).map_err(CliError::runtime)?;
                Ok((subset(train, *train_items)?, subset(test, *test_items)?))
            }
            DatasetConfig::Cifar10 {
                dir,
                train_items,
                test_items,
            } => {
                let dir = data_dir(dir.as_deref(), &["cifar-10-batches-bin", "cifar10"])?;
                let train = load_cifar10_dir(&dir, Split::Train).map_err(CliError::runtime)?;
                let test = load_cifar10_dir(&dir, Split::Test).map_err(CliError::runtime)?;
                Ok((subset(train, *train_items)?, subset(test, *test_items)?))
            }
        }
    }
}

fn subset(data: Dataset, n: Option<usize>) -> Result<Dataset, CliError> {
    match n {
        Some(n) => data.take(n).map_err(CliError::runtime),
        None => Ok(data),
    }
}

/// The configured directory, or `$DWNET_DATA_DIR` (or one of `children` inside it).
fn data_dir(configured: Option<&Path>, children: &[&str]) -> Result<PathBuf, CliError> {
    let dir = match configured {
        Some(d) => d.to_path_buf(),
        None => {
            let root = std::env::var_os(DATA_DIR_ENV)
                .ok_or_else(|| invalid("dataset.dir", format!("not set, and {DATA_DIR_ENV} is not set either")))?;
            let root = PathBuf::from(root);
            children
                .iter()
                .map(|c| root.join(c))
                .find(|p| p.is_dir())
                .unwrap_or(root)
        }
    };
    if !dir.is_dir() {
        return Err(invalid("dataset.dir", format!("{} is not a directory", dir.display())));
    }
    Ok(dir)
}
