//! The minibatch training loop.

use std::io::Write;
use std::path::Path;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::checkpoint::Checkpoint;
use crate::data::{BatchIterator, Dataset};
use crate::error::{Error, Result};
use crate::experiment::{evaluate_accuracy, AccuracyCurve};
use crate::network::{build_network, Model, NetworkSpec};
use crate::optim::Optimizer;
use crate::rng::{streams, Rng};

/// How often, and on how many test items, accuracy is measured during training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalConfig {
    /// Evaluate after every `every`-th iteration; 0 disables evaluation.
    pub every: u64,
    /// Number of leading test items used.
    pub subset: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig { every: 1, subset: 1000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    /// 1-based: the number of optimizer steps taken so far.
    pub iteration: u64,
    pub train_loss: f64,
    pub test_accuracy: Option<f64>,
}

/// A training run in progress: model, optimizer and batch order.
#[derive(Debug, Clone)]
pub struct Trainer {
    pub(crate) spec: NetworkSpec,
    pub(crate) model: Model,
    pub(crate) optimizer: Optimizer,
    pub(crate) batches: BatchIterator,
    pub(crate) iteration: u64,
    pub(crate) train_len: usize,
    step_time: Duration,
}

impl Trainer {
    /// Fresh run over a training set of `train_len` items. Batch order comes from
    /// the seed's shuffle stream, so it is shared by variants with the same seed.
    pub fn new(spec: &NetworkSpec, train_len: usize) -> Result<Self> {
        let model = build_network(spec)?;
        let batches = BatchIterator::new(
            train_len,
            spec.batch_size,
            Rng::with_stream(spec.seed, streams::SHUFFLE),
        )?;
        Ok(Self::assemble(spec.clone(), model, batches, 0, train_len))
    }

    pub(crate) fn assemble(
        spec: NetworkSpec,
        model: Model,
        batches: BatchIterator,
        iteration: u64,
        train_len: usize,
    ) -> Self {
        let optimizer = {
            let params: Vec<_> = model.parameters().into_iter().map(|(_, t)| t).collect();
            Optimizer::new(&spec.optimizer, &params)
        };
        Trainer {
            spec,
            model,
            optimizer,
            batches,
            iteration,
            train_len,
            step_time: Duration::ZERO,
        }
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn into_model(self) -> Model {
        self.model
    }

    pub fn iteration(&self) -> u64 {
        self.iteration
    }

    /// Wall time spent inside [`Trainer::step`] (evaluation excluded).
    pub fn step_time(&self) -> Duration {
        self.step_time
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint::capture(self)
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        ck.restore()
    }

    fn check_dataset(&self, data: &Dataset) -> Result<()> {
        if data.len() != self.train_len {
            return Err(Error::Argument(format!(
                "trainer expects {} training items, got {}",
                self.train_len,
                data.len()
            )));
        }
        if data.image_shape() != self.spec.input_shape {
            return Err(Error::dim("training data", &data.image_shape(), &self.spec.input_shape));
        }
        if data.num_classes() != self.spec.num_classes() {
            return Err(Error::Argument(format!(
                "dataset has {} classes, network outputs {}",
                data.num_classes(),
                self.spec.num_classes()
            )));
        }
        Ok(())
    }

    /// One optimizer step on the next minibatch; returns the batch loss.
    pub fn step(&mut self, data: &Dataset) -> Result<f64> {
        let start = Instant::now();
        let (x, y) = self.batches.next_batch(data)?;
        let (loss, grads) = self.model.loss_and_gradients(&x, &y)?;
        let iteration = self.iteration + 1;
        if !loss.is_finite() {
            return Err(Error::NonFinite { iteration, loss });
        }
        self.optimizer
            .step(&mut self.model.parameters_mut(), &grads, self.spec.learning_rate)?;
        self.iteration = iteration;
        self.step_time += start.elapsed();
        Ok(loss)
    }

    /// Steps until `spec.iterations`, reporting each iteration to `observer`.
    /// Test accuracy is attached at the cadence in `eval` when a test set is given.
    pub fn run(
        &mut self,
        train: &Dataset,
        test: Option<&Dataset>,
        eval: EvalConfig,
        mut observer: impl FnMut(&IterationRecord),
    ) -> Result<()> {
        self.check_dataset(train)?;
        let test = match test {
            Some(t) if eval.every > 0 => Some(t.take(eval.subset)?),
            _ => None,
        };
        while self.iteration < self.spec.iterations {
            let train_loss = self.step(train)?;
            let test_accuracy = match &test {
                Some(t) if self.iteration % eval.every == 0 => Some(evaluate_accuracy(&self.model, t)?),
                _ => None,
            };
            observer(&IterationRecord {
                iteration: self.iteration,
                train_loss,
                test_accuracy,
            });
        }
        Ok(())
    }
}

/// Result of [`train`].
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: Model,
    pub log: Vec<IterationRecord>,
    pub curve: AccuracyCurve,
    pub step_time: Duration,
}

/// Builds the network for `spec` and trains it for `spec.iterations` steps.
pub fn train(spec: &NetworkSpec, train: &Dataset, test: Option<&Dataset>, eval: EvalConfig) -> Result<TrainOutcome> {
    let mut trainer = Trainer::new(spec, train.len())?;
    let mut log = Vec::with_capacity(spec.iterations as usize);
    trainer.run(train, test, eval, |r| log.push(*r))?;
    let curve = AccuracyCurve::from_log(&log);
    let step_time = trainer.step_time();
    Ok(TrainOutcome {
        model: trainer.into_model(),
        log,
        curve,
        step_time,
    })
}

/// Writes `iteration,train_loss,test_accuracy` rows; the accuracy cell is empty
/// on iterations without an evaluation.
pub fn write_log_csv(path: &Path, log: &[IterationRecord]) -> Result<()> {
    let mut out = String::from("iteration,train_loss,test_accuracy\n");
    for r in log {
        let acc = r.test_accuracy.map(|a| a.to_string()).unwrap_or_default();
        out.push_str(&format!("{},{},{}\n", r.iteration, r.train_loss, acc));
    }
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{make_toy_dataset, ToyKind};
    use crate::layers::{Activation, Loss};
    use crate::network::{GammaInit, InitSpec, LayerSpec, OptimizerSpec};

    fn toy_spec(iterations: u64, dw: bool) -> NetworkSpec {
        NetworkSpec {
            input_shape: [1, 1, 2],
            layers: vec![
                LayerSpec::Dense {
                    units: 8,
                    activation: Activation::Sigmoid,
                    double_weight: dw,
                },
                LayerSpec::Dense {
                    units: 2,
                    activation: Activation::Softmax,
                    double_weight: dw,
                },
            ],
            loss: Loss::CrossEntropy,
            learning_rate: 0.05,
            batch_size: 20,
            optimizer: OptimizerSpec::adam(),
            init: InitSpec {
                weight_sigma: 0.1,
                gamma_init: GammaInit::TruncatedNormal,
            },
            iterations,
            seed: 5,
        }
    }

    #[test]
    fn zero_iterations_leave_the_build_untouched() {
        let data = make_toy_dataset(&mut Rng::new(1), 40, ToyKind::TwoGaussians).unwrap();
        let spec = toy_spec(0, true);
        let out = train(&spec, &data, None, EvalConfig::default()).unwrap();
        assert_eq!(out.model, build_network(&spec).unwrap());
        assert!(out.log.is_empty());
    }

    #[test]
    fn same_seed_same_parameters() {
        let data = make_toy_dataset(&mut Rng::new(1), 60, ToyKind::TwoGaussians).unwrap();
        let spec = toy_spec(30, true);
        let a = train(&spec, &data, Some(&data), EvalConfig { every: 5, subset: 60 }).unwrap();
        let b = train(&spec, &data, Some(&data), EvalConfig { every: 5, subset: 60 }).unwrap();
        assert_eq!(a.model, b.model);
        assert_eq!(a.log, b.log);
        assert_eq!(a.curve.points().len(), 6);
    }

    #[test]
    fn non_finite_loss_names_the_iteration() {
        let data = make_toy_dataset(&mut Rng::new(1), 40, ToyKind::TwoGaussians).unwrap();
        let mut spec = toy_spec(50, false);
        // a linear SSE head diverges geometrically under a huge SGD step
        spec.layers[1] = LayerSpec::Dense {
            units: 2,
            activation: Activation::Linear,
            double_weight: false,
        };
        spec.loss = Loss::Sse;
        spec.learning_rate = 1e6;
        spec.optimizer = OptimizerSpec::Sgd;
        let err = train(&spec, &data, None, EvalConfig::default()).unwrap_err();
        assert!(matches!(err, Error::NonFinite { iteration, .. } if iteration > 1));
    }

    #[test]
    fn wrong_input_shape_rejected() {
        let data = make_toy_dataset(&mut Rng::new(1), 40, ToyKind::TwoGaussians).unwrap();
        let mut spec = toy_spec(5, false);
        spec.input_shape = [2, 1, 1];
        assert!(train(&spec, &data, None, EvalConfig::default()).is_err());
    }

    #[test]
    fn log_csv_layout() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("log.csv");
        let log = [
            IterationRecord {
                iteration: 1,
                train_loss: 0.5,
                test_accuracy: None,
            },
            IterationRecord {
                iteration: 2,
                train_loss: 0.25,
                test_accuracy: Some(0.75),
            },
        ];
        write_log_csv(&path, &log).unwrap();
        assert_eq!(
            std::fs::read_to_string(&path).unwrap(),
            "iteration,train_loss,test_accuracy\n1,0.5,\n2,0.25,0.75\n"
        );
    }
}
