//! Central finite-difference checks of the analytic gradients.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::layers::{Activation, LayerCache};
use crate::network::{Layer, Model};
use crate::rng::{draw_truncated_normal, Rng};
use crate::tensor::Tensor;

/// Models above this many parameters are refused (two forward passes each).
pub const GRADCHECK_PARAM_LIMIT: usize = 20_000;

/// Floor on the denominator of the relative error.
pub const RELATIVE_ERROR_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TensorCheck {
    pub name: String,
    pub len: usize,
    /// `max |a − n| / max(|a|, |n|, 1e-8)` over the tensor's elements.
    pub max_relative_error: f64,
    pub max_abs_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradCheckReport {
    pub epsilon: f64,
    pub tensors: Vec<TensorCheck>,
}

impl GradCheckReport {
    pub fn max_relative_error(&self) -> f64 {
        self.tensors.iter().map(|t| t.max_relative_error).fold(0.0, f64::max)
    }

    pub fn passes(&self, tolerance: f64) -> bool {
        self.max_relative_error() < tolerance
    }
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(RELATIVE_ERROR_FLOOR)
}

/// Compares the model's backward pass on `(x, target)` against central
/// differences `(E(θ+ε) − E(θ−ε)) / 2ε` for every parameter element.
pub fn gradient_check(model: &Model, x: &Tensor, target: &Tensor, epsilon: f64) -> Result<GradCheckReport> {
    gradient_check_with(model, x, target, epsilon, |_| {})
}

/// As [`gradient_check`], but `tamper` may modify the analytic gradients first
/// (a hook for negative controls).
pub fn gradient_check_with(
    model: &Model,
    x: &Tensor,
    target: &Tensor,
    epsilon: f64,
    tamper: impl FnOnce(&mut [Tensor]),
) -> Result<GradCheckReport> {
    let count = model.parameter_count();
    if count > GRADCHECK_PARAM_LIMIT {
        return Err(Error::TooManyParameters {
            count,
            limit: GRADCHECK_PARAM_LIMIT,
        });
    }
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::Argument(format!("epsilon must be positive, got {epsilon}")));
    }
    let mut probe = model.clone();
    let (_, mut analytic) = probe.loss_and_gradients(x, target)?;
    tamper(&mut analytic);
    let names: Vec<String> = model.parameters().into_iter().map(|(n, _)| n).collect();
    let mut tensors = Vec::with_capacity(names.len());
    for (k, name) in names.into_iter().enumerate() {
        let len = analytic[k].len();
        let (mut max_rel, mut max_abs) = (0.0f64, 0.0f64);
        for i in 0..len {
            let original = probe.parameters_mut()[k].data()[i];
            probe.parameters_mut()[k].data_mut()[i] = original + epsilon;
            let plus = probe.loss(x, target)?;
            probe.parameters_mut()[k].data_mut()[i] = original - epsilon;
            let minus = probe.loss(x, target)?;
            probe.parameters_mut()[k].data_mut()[i] = original;
            let numeric = (plus - minus) / (2.0 * epsilon);
            let a = analytic[k].data()[i];
            max_rel = max_rel.max(relative_error(a, numeric));
            max_abs = max_abs.max((a - numeric).abs());
        }
        tensors.push(TensorCheck {
            name,
            len,
            max_relative_error: max_rel,
            max_abs_error: max_abs,
        });
    }
    Ok(GradCheckReport { epsilon, tensors })
}

/// A copy of `model` with every parameter redrawn at a scale where central
/// differences resolve the gradients: weights so each pre-activation has roughly
/// unit variance (for double-weight layers each factor gets `fan_in^-1/4`, so the
/// product has variance `1/fan_in`), and biases away from zero.
///
/// At the training initialization (σ = 0.1, zero biases) many gradients sit below
/// `1e-8`, where the rounding noise of an `O(1)` loss divided by `2ε` dominates,
/// and every ReLU pre-activation is within rounding of its kink.
pub fn conditioned_copy(model: &Model, rng: &mut Rng) -> Result<Model> {
    let mut out = model.clone();
    for layer in out.layers_mut() {
        match layer {
            Layer::Dense { params, .. } => {
                let fan_in = params.in_features() as f64;
                let sigma = if params.gamma.is_some() {
                    fan_in.powf(-0.25)
                } else {
                    fan_in.powf(-0.5)
                };
                params.w = draw_truncated_normal(rng, params.w.shape(), 0.0, sigma)?;
                if let Some(g) = &mut params.gamma {
                    *g = draw_truncated_normal(rng, g.shape(), 0.0, sigma)?;
                }
                params.b = draw_truncated_normal(rng, params.b.shape(), 0.0, 0.5)?;
            }
            Layer::Conv { params, .. } => {
                let s = params.kernels.shape();
                let fan_in = (s[0] * s[1] * s[2]) as f64;
                params.kernels = draw_truncated_normal(rng, s, 0.0, fan_in.powf(-0.5))?;
                params.b = draw_truncated_normal(rng, params.b.shape(), 0.0, 0.5)?;
            }
        }
    }
    Ok(out)
}

/// Smallest `|z|` over all ReLU pre-activations for input `x`; `None` when the
/// model has no ReLU layer. Finite differences are only meaningful when this is
/// well above the step size.
pub fn relu_margin(model: &Model, x: &Tensor) -> Result<Option<f64>> {
    let mut probe = model.clone();
    probe.forward(x)?;
    let caches: &[LayerCache] = probe.cache.as_deref().unwrap_or(&[]);
    let margin = model
        .layers()
        .iter()
        .zip(caches)
        .filter(|(layer, _)| {
            matches!(
                layer,
                Layer::Dense {
                    activation: Activation::Relu,
                    ..
                } | Layer::Conv {
                    activation: Activation::Relu,
                    ..
                }
            )
        })
        .flat_map(|(_, c)| c.z.data().iter().map(|v| v.abs()))
        .reduce(f64::min);
    Ok(margin)
}

/// Step used for networks without ReLU, evaluated at their own parameters.
pub const SMOOTH_EPSILON: f64 = 1e-3;
/// Step used for ReLU networks, evaluated on a [`conditioned_copy`].
pub const RELU_EPSILON: f64 = 1e-4;
/// Inputs are redrawn until every ReLU pre-activation is this many steps from 0.
const RELU_MARGIN_STEPS: f64 = 10.0;
const MAX_INPUT_DRAWS: usize = 200;

/// A model, a batch and a step size at which central differences are reliable.
#[derive(Debug, Clone)]
pub struct CheckSetup {
    pub model: Model,
    pub x: Tensor,
    pub target: Tensor,
    pub epsilon: f64,
}

impl CheckSetup {
    /// Smooth networks are checked as built, with a step large enough that the
    /// rounding noise of the loss stays below the smallest gradients. ReLU networks
    /// are checked on a conditioned copy with inputs in `[0, 1)` redrawn until no
    /// pre-activation lies near a kink. Targets are one-hot on random classes.
    pub fn new(model: &Model, rng: &mut Rng, batch: usize) -> Result<Self> {
        if batch == 0 {
            return Err(Error::Argument("gradient check batch must be positive".into()));
        }
        let has_relu = model.layers().iter().any(|l| {
            matches!(
                l,
                Layer::Dense {
                    activation: Activation::Relu,
                    ..
                } | Layer::Conv {
                    activation: Activation::Relu,
                    ..
                }
            )
        });
        let [h, w, c] = model.input_shape();
        let draw_x = |rng: &mut Rng| {
            let data = (0..batch * h * w * c).map(|_| rng.uniform()).collect();
            Tensor::new(vec![batch, h, w, c], data)
        };
        let (model, x, epsilon) = if has_relu {
            let model = conditioned_copy(model, rng)?;
            let mut found = None;
            for _ in 0..MAX_INPUT_DRAWS {
                let x = draw_x(rng)?;
                if relu_margin(&model, &x)?.is_some_and(|m| m > RELU_MARGIN_STEPS * RELU_EPSILON) {
                    found = Some(x);
                    break;
                }
            }
            let x = found.ok_or_else(|| {
                Error::Argument(format!(
                    "no input batch kept ReLU units clear of their kink in {MAX_INPUT_DRAWS} draws"
                ))
            })?;
            (model, x, RELU_EPSILON)
        } else {
            (model.clone(), draw_x(rng)?, SMOOTH_EPSILON)
        };
        let classes = model.output_len();
        let mut target = Tensor::zeros(&[batch, classes]);
        for r in 0..batch {
            let k = rng.below(classes as u64) as usize;
            target.data_mut()[r * classes + k] = 1.0;
        }
        Ok(CheckSetup {
            model,
            x,
            target,
            epsilon,
        })
    }

    pub fn run(&self) -> Result<GradCheckReport> {
        gradient_check(&self.model, &self.x, &self.target, self.epsilon)
    }
}
