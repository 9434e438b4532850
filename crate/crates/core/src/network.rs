//! Declarative network specs, the architecture presets, and the assembled [`Model`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::layers::{
    conv2d_backward, conv2d_forward, dense_backward, dense_backward_preact, dense_forward, Activation, ConvParams,
    DenseParams, LayerCache, Loss,
};
use crate::rng::{draw_truncated_normal, streams, Rng};
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum LayerSpec {
    Dense {
        units: usize,
        activation: Activation,
        #[serde(default)]
        double_weight: bool,
    },
    Conv {
        depth: usize,
        window: usize,
        stride: usize,
        activation: Activation,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum OptimizerSpec {
    Adam { beta1: f64, beta2: f64, epsilon: f64 },
    Sgd,
}

impl OptimizerSpec {
    pub const fn adam() -> Self {
        OptimizerSpec::Adam {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GammaInit {
    TruncatedNormal,
    Ones,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitSpec {
    pub weight_sigma: f64,
    pub gamma_init: GammaInit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSpec {
    /// `[H, W, channels]` of one input image.
    pub input_shape: [usize; 3],
    pub layers: Vec<LayerSpec>,
    pub loss: Loss,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub optimizer: OptimizerSpec,
    pub init: InitSpec,
    pub iterations: u64,
    pub seed: u64,
}

pub const PRESETS: [&str; 4] = ["mnist-fnn", "mnist-cnn", "cifar10-cnn", "toy"];

fn dense(units: usize, activation: Activation, double_weight: bool) -> LayerSpec {
    LayerSpec::Dense {
        units,
        activation,
        double_weight,
    }
}

fn conv(depth: usize, window: usize, stride: usize) -> LayerSpec {
    LayerSpec::Conv {
        depth,
        window,
        stride,
        activation: Activation::Relu,
    }
}

impl NetworkSpec {
    /// Feed-forward MNIST classifier: 200/100/60/30 sigmoid, softmax output, Adam at 0.003.
    pub fn mnist_fnn(double_weight: bool) -> Self {
        let mut layers: Vec<LayerSpec> = [200, 100, 60, 30]
            .into_iter()
            .map(|u| dense(u, Activation::Sigmoid, double_weight))
            .collect();
        layers.push(dense(10, Activation::Softmax, double_weight));
        NetworkSpec {
            input_shape: [28, 28, 1],
            layers,
            loss: Loss::CrossEntropy,
            learning_rate: 0.003,
            batch_size: 100,
            optimizer: OptimizerSpec::adam(),
            init: InitSpec {
                weight_sigma: 0.1,
                gamma_init: GammaInit::TruncatedNormal,
            },
            iterations: 5000,
            seed: 0,
        }
    }

    /// Convolutional classifier: conv 4/8/12 (5×5 s1, 5×5 s2, 4×4 s2, SAME), FC 200/80, ReLU.
    /// Double weights only ever apply to the fully connected layers.
    pub fn mnist_cnn(double_weight: bool) -> Self {
        NetworkSpec {
            input_shape: [28, 28, 1],
            layers: vec![
                conv(4, 5, 1),
                conv(8, 5, 2),
                conv(12, 4, 2),
                dense(200, Activation::Relu, double_weight),
                dense(80, Activation::Relu, double_weight),
                dense(10, Activation::Softmax, double_weight),
            ],
            learning_rate: 0.0008,
            ..Self::mnist_fnn(double_weight)
        }
    }

    pub fn cifar10_cnn(double_weight: bool) -> Self {
        NetworkSpec {
            input_shape: [32, 32, 3],
            learning_rate: 0.0006,
            batch_size: 200,
            ..Self::mnist_cnn(double_weight)
        }
    }

    /// Two-input, two-class network for the synthetic toy sets: 8 sigmoid units,
    /// softmax output, Adam at 0.05, batch 20, 500 iterations.
    pub fn toy(double_weight: bool) -> Self {
        NetworkSpec {
            input_shape: [1, 1, 2],
            layers: vec![
                dense(8, Activation::Sigmoid, double_weight),
                dense(2, Activation::Softmax, double_weight),
            ],
            learning_rate: 0.05,
            batch_size: 20,
            iterations: 500,
            ..Self::mnist_fnn(double_weight)
        }
    }

    pub fn preset(name: &str, double_weight: bool) -> Result<Self> {
        match name {
            "toy" => Ok(Self::toy(double_weight)),
            "mnist-fnn" => Ok(Self::mnist_fnn(double_weight)),
            "mnist-cnn" => Ok(Self::mnist_cnn(double_weight)),
            "cifar10-cnn" => Ok(Self::cifar10_cnn(double_weight)),
            other => Err(Error::invalid(
                "preset",
                format!("unknown preset {other:?}; expected one of {PRESETS:?}"),
            )),
        }
    }

    /// Sets the double-weight flag on every dense layer.
    pub fn with_double_weight(mut self, on: bool) -> Self {
        for layer in &mut self.layers {
            if let LayerSpec::Dense { double_weight, .. } = layer {
                *double_weight = on;
            }
        }
        self
    }

    pub fn is_double_weight(&self) -> bool {
        self.layers.iter().any(|l| {
            matches!(
                l,
                LayerSpec::Dense {
                    double_weight: true,
                    ..
                }
            )
        })
    }

    /// Replaces the hidden dense layers (every dense layer but the output) with
    /// `widths`, keeping the first hidden layer's activation and double-weight flag.
    pub fn with_hidden_widths(mut self, widths: &[usize]) -> Result<Self> {
        let first_dense = self
            .layers
            .iter()
            .position(|l| matches!(l, LayerSpec::Dense { .. }))
            .ok_or_else(|| Error::invalid("layers", "no dense layers"))?;
        let output = self.layers.pop().ok_or_else(|| Error::invalid("layers", "empty"))?;
        let template = self.layers.get(first_dense).cloned();
        let (activation, double_weight) = match (template, &output) {
            (
                Some(LayerSpec::Dense {
                    activation,
                    double_weight,
                    ..
                }),
                _,
            ) => (activation, double_weight),
            (_, LayerSpec::Dense { double_weight, .. }) => (Activation::Sigmoid, *double_weight),
            _ => return Err(Error::invalid("layers", "last layer must be dense")),
        };
        self.layers.truncate(first_dense);
        self.layers
            .extend(widths.iter().map(|&u| dense(u, activation, double_weight)));
        self.layers.push(output);
        Ok(self)
    }

    /// Shrinks the architecture for gradient checks: hidden widths, conv depths and
    /// input spatial extents are multiplied by `factor` (rounded up, at least 1).
    /// Windows, strides, channels and the output width are unchanged.
    pub fn scaled(mut self, factor: f64) -> Result<Self> {
        if !(factor > 0.0 && factor <= 1.0) {
            return Err(Error::invalid("scale", format!("must be in (0, 1], got {factor}")));
        }
        let s = |v: usize| ((v as f64 * factor).ceil() as usize).max(1);
        self.input_shape = [s(self.input_shape[0]), s(self.input_shape[1]), self.input_shape[2]];
        let last = self.layers.len().saturating_sub(1);
        for (i, layer) in self.layers.iter_mut().enumerate() {
            match layer {
                LayerSpec::Dense { units, .. } if i != last => *units = s(*units),
                LayerSpec::Conv { depth, .. } => *depth = s(*depth),
                _ => {}
            }
        }
        Ok(self)
    }

    pub fn num_classes(&self) -> usize {
        match self.layers.last() {
            Some(LayerSpec::Dense { units, .. }) => *units,
            _ => 0,
        }
    }

    /// Whether two specs describe the same experiment apart from double-weight flags
    /// and the seed.
    pub fn same_apart_from_double_weight(&self, other: &NetworkSpec) -> bool {
        let norm = |s: &NetworkSpec| NetworkSpec {
            seed: 0,
            ..s.clone().with_double_weight(false)
        };
        norm(self) == norm(other)
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_shape.contains(&0) {
            return Err(Error::invalid("input_shape", "extents must be positive"));
        }
        if self.layers.is_empty() {
            return Err(Error::invalid("layers", "at least one layer is required"));
        }
        let last = self.layers.len() - 1;
        let mut seen_dense = false;
        for (i, layer) in self.layers.iter().enumerate() {
            let field = |name: &str| format!("layers[{i}].{name}");
            match *layer {
                LayerSpec::Dense { units, activation, .. } => {
                    seen_dense = true;
                    if units == 0 {
                        return Err(Error::invalid(field("units"), "must be positive"));
                    }
                    if activation == Activation::Softmax && i != last {
                        return Err(Error::invalid(
                            field("activation"),
                            "softmax is only allowed on the output layer",
                        ));
                    }
                }
                LayerSpec::Conv {
                    depth,
                    window,
                    stride,
                    activation,
                } => {
                    if seen_dense {
                        return Err(Error::invalid(field("type"), "conv layers must precede dense layers"));
                    }
                    if i == last {
                        return Err(Error::invalid(field("type"), "the output layer must be dense"));
                    }
                    if depth == 0 {
                        return Err(Error::invalid(field("depth"), "must be positive"));
                    }
                    if window == 0 {
                        return Err(Error::invalid(field("window"), "must be positive"));
                    }
                    if stride == 0 {
                        return Err(Error::invalid(field("stride"), "must be positive"));
                    }
                    if activation == Activation::Softmax {
                        return Err(Error::invalid(
                            field("activation"),
                            "softmax is only allowed on the output layer",
                        ));
                    }
                }
            }
        }
        let LayerSpec::Dense {
            activation: out_act, ..
        } = self.layers[last]
        else {
            return Err(Error::invalid(
                format!("layers[{last}].type"),
                "the output layer must be dense",
            ));
        };
        match (self.loss, out_act == Activation::Softmax) {
            (Loss::CrossEntropy, false) => {
                return Err(Error::invalid(
                    format!("layers[{last}].activation"),
                    "cross_entropy loss requires a softmax output layer",
                ))
            }
            (Loss::Sse, true) => {
                return Err(Error::invalid(
                    format!("layers[{last}].activation"),
                    "softmax output requires cross_entropy loss",
                ))
            }
            _ => {}
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid("learning_rate", "must be positive and finite"));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch_size", "must be positive"));
        }
        if let OptimizerSpec::Adam { beta1, beta2, epsilon } = self.optimizer {
            if !(0.0..1.0).contains(&beta1) {
                return Err(Error::invalid("optimizer.beta1", "must be in [0, 1)"));
            }
            if !(0.0..1.0).contains(&beta2) {
                return Err(Error::invalid("optimizer.beta2", "must be in [0, 1)"));
            }
            if epsilon.is_nan() || epsilon <= 0.0 {
                return Err(Error::invalid("optimizer.epsilon", "must be positive"));
            }
        }
        if !(self.init.weight_sigma > 0.0 && self.init.weight_sigma.is_finite()) {
            return Err(Error::invalid("init.weight_sigma", "must be positive and finite"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Layer {
    Dense {
        params: DenseParams,
        activation: Activation,
    },
    Conv {
        params: ConvParams,
        activation: Activation,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    input_shape: [usize; 3],
    layers: Vec<Layer>,
    loss: Loss,
    pub(crate) cache: Option<Vec<LayerCache>>,
}

/// Builds a model from `spec` with weights drawn from the spec's seed.
///
/// W and conv kernels come from stream [`streams::INIT`] in layer order; Γ from
/// [`streams::GAMMA_INIT`]. A standard and a double-weight variant built from the
/// same seed therefore share their W draws exactly.
pub fn build_network(spec: &NetworkSpec) -> Result<Model> {
    let mut weights = Rng::with_stream(spec.seed, streams::INIT);
    let mut gammas = Rng::with_stream(spec.seed, streams::GAMMA_INIT);
    build_network_with(spec, &mut weights, &mut gammas)
}

pub fn build_network_with(spec: &NetworkSpec, weights: &mut Rng, gammas: &mut Rng) -> Result<Model> {
    spec.validate()?;
    let sigma = spec.init.weight_sigma;
    let [h, w, c] = spec.input_shape;
    let mut shape = vec![1, h, w, c];
    let mut layers = Vec::with_capacity(spec.layers.len());
    for layer in &spec.layers {
        match *layer {
            LayerSpec::Conv {
                depth,
                window,
                stride,
                activation,
            } => {
                let cin = shape[3];
                let kernels = draw_truncated_normal(weights, &[window, window, cin, depth], 0.0, sigma)?;
                let params = ConvParams::new(kernels, Tensor::zeros(&[depth]), stride)?;
                shape = params.output_shape(&shape)?;
                layers.push(Layer::Conv { params, activation });
            }
            LayerSpec::Dense {
                units,
                activation,
                double_weight,
            } => {
                let fan_in: usize = shape[1..].iter().product();
                let wt = draw_truncated_normal(weights, &[units, fan_in], 0.0, sigma)?;
                let gamma = match (double_weight, spec.init.gamma_init) {
                    (false, _) => None,
                    (true, GammaInit::Ones) => Some(Tensor::ones(&[units, fan_in])),
                    (true, GammaInit::TruncatedNormal) => {
                        Some(draw_truncated_normal(gammas, &[units, fan_in], 0.0, sigma)?)
                    }
                };
                let params = DenseParams::new(wt, gamma, Tensor::zeros(&[units]))?;
                shape = vec![1, units];
                layers.push(Layer::Dense { params, activation });
            }
        }
    }
    Ok(Model {
        input_shape: spec.input_shape,
        layers,
        loss: spec.loss,
        cache: None,
    })
}

impl Model {
    /// Assembles a model from explicit layers (mostly for tests and oracles).
    pub fn from_layers(input_shape: [usize; 3], layers: Vec<Layer>, loss: Loss) -> Self {
        Model {
            input_shape,
            layers,
            loss,
            cache: None,
        }
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub(crate) fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn input_shape(&self) -> [usize; 3] {
        self.input_shape
    }

    /// Width of the final layer (the number of classes for classifiers).
    pub fn output_len(&self) -> usize {
        match self.layers.last() {
            Some(Layer::Dense { params, .. }) => params.out_features(),
            Some(Layer::Conv { params, .. }) => params.b.len(),
            None => 0,
        }
    }

    pub fn loss_kind(&self) -> Loss {
        self.loss
    }

    /// Named parameter tensors in the fixed order used for gradients, optimizer state
    /// and checkpoints.
    pub fn parameters(&self) -> Vec<(String, &Tensor)> {
        let mut out = Vec::new();
        for (i, layer) in self.layers.iter().enumerate() {
            match layer {
                Layer::Dense { params, .. } => {
                    out.push((format!("layer{i}.w"), &params.w));
                    if let Some(g) = &params.gamma {
                        out.push((format!("layer{i}.gamma"), g));
                    }
                    out.push((format!("layer{i}.b"), &params.b));
                }
                Layer::Conv { params, .. } => {
                    out.push((format!("layer{i}.kernels"), &params.kernels));
                    out.push((format!("layer{i}.b"), &params.b));
                }
            }
        }
        out
    }

    pub fn parameters_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = Vec::new();
        for layer in &mut self.layers {
            match layer {
                Layer::Dense { params, .. } => {
                    out.push(&mut params.w);
                    if let Some(g) = &mut params.gamma {
                        out.push(g);
                    }
                    out.push(&mut params.b);
                }
                Layer::Conv { params, .. } => {
                    out.push(&mut params.kernels);
                    out.push(&mut params.b);
                }
            }
        }
        out
    }

    pub fn parameter_count(&self) -> usize {
        self.parameters().iter().map(|(_, t)| t.len()).sum()
    }

    fn check_input(&self, x: &Tensor) -> Result<()> {
        let [h, w, c] = self.input_shape;
        let ok = match x.shape() {
            [_, xh, xw, xc] => [*xh, *xw, *xc] == [h, w, c],
            [_, f] => *f == h * w * c,
            _ => false,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::dim("model input", x.shape(), &[h, w, c]))
        }
    }

    fn run_forward(&self, x: &Tensor, keep: bool) -> Result<(Tensor, Vec<LayerCache>)> {
        self.check_input(x)?;
        let mut caches = Vec::with_capacity(if keep { self.layers.len() } else { 0 });
        let mut current = x.clone();
        if let (Some(Layer::Conv { .. }), 2) = (self.layers.first(), x.rank()) {
            let [h, w, c] = self.input_shape;
            current = current.into_shape(&[x.shape()[0], h, w, c])?;
        }
        for layer in &self.layers {
            let (a, cache) = match layer {
                Layer::Dense { params, activation } => dense_forward(params, &current, *activation)?,
                Layer::Conv { params, activation } => conv2d_forward(params, &current, *activation)?,
            };
            if keep {
                caches.push(cache);
            }
            current = a;
        }
        Ok((current, caches))
    }

    /// Network output (class probabilities for a softmax head).
    pub fn predict(&self, x: &Tensor) -> Result<Tensor> {
        Ok(self.run_forward(x, false)?.0)
    }

    /// Forward pass that keeps the per-layer caches for a following [`Model::backward`].
    pub fn forward(&mut self, x: &Tensor) -> Result<Tensor> {
        let (out, caches) = self.run_forward(x, true)?;
        self.cache = Some(caches);
        Ok(out)
    }

    /// Batch-mean loss of the network on `(x, target)`.
    pub fn loss(&self, x: &Tensor, target: &Tensor) -> Result<f64> {
        let (out, caches) = self.run_forward(x, true)?;
        let head = match self.loss {
            Loss::CrossEntropy => &caches.last().expect("non-empty model").z,
            Loss::Sse => &out,
        };
        Ok(self.loss.loss_and_grad(head, target)?.0)
    }

    /// Consumes the cache from the last [`Model::forward`] and returns the loss and
    /// gradients in [`Model::parameters`] order.
    pub fn backward(&mut self, target: &Tensor) -> Result<(f64, Vec<Tensor>)> {
        let caches = self
            .cache
            .take()
            .ok_or_else(|| Error::State("backward called without a preceding forward pass".into()))?;
        let last = caches.last().expect("non-empty model");
        let (loss, mut upstream) = match self.loss {
            Loss::CrossEntropy => self.loss.loss_and_grad(&last.z, target)?,
            Loss::Sse => self.loss.loss_and_grad(&last.a, target)?,
        };
        let mut per_layer: Vec<Vec<Tensor>> = Vec::with_capacity(self.layers.len());
        for (i, (layer, cache)) in self.layers.iter().zip(&caches).enumerate().rev() {
            let fused = i + 1 == self.layers.len() && self.loss == Loss::CrossEntropy;
            upstream = upstream.into_shape(cache.z.shape())?;
            match layer {
                Layer::Dense { params, activation } => {
                    let g = if fused {
                        dense_backward_preact(params, cache, &upstream)?
                    } else {
                        dense_backward(params, cache, &upstream, *activation)?
                    };
                    let mut grads = vec![g.w];
                    grads.extend(g.gamma);
                    grads.push(g.b);
                    per_layer.push(grads);
                    upstream = g.input;
                }
                Layer::Conv { params, activation } => {
                    let g = conv2d_backward(params, cache, &upstream, *activation)?;
                    per_layer.push(vec![g.kernels, g.b]);
                    upstream = g.input;
                }
            }
        }
        Ok((loss, per_layer.into_iter().rev().flatten().collect()))
    }

    pub fn loss_and_gradients(&mut self, x: &Tensor, target: &Tensor) -> Result<(f64, Vec<Tensor>)> {
        self.forward(x)?;
        self.backward(target)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense_widths(spec: &NetworkSpec) -> Vec<usize> {
        spec.layers
            .iter()
            .filter_map(|l| match l {
                LayerSpec::Dense { units, .. } => Some(*units),
                _ => None,
            })
            .collect()
    }

    #[test]
    fn mnist_fnn_preset_widths() {
        let spec = NetworkSpec::mnist_fnn(false);
        assert_eq!(dense_widths(&spec), vec![200, 100, 60, 30, 10]);
        let m = build_network(&spec).unwrap();
        let shapes: Vec<Vec<usize>> = m
            .parameters()
            .iter()
            .filter(|(n, _)| n.ends_with(".w"))
            .map(|(_, t)| t.shape().to_vec())
            .collect();
        assert_eq!(
            shapes,
            vec![
                vec![200, 784],
                vec![100, 200],
                vec![60, 100],
                vec![30, 60],
                vec![10, 30]
            ]
        );
        assert_eq!(spec.learning_rate, 0.003);
        assert_eq!(spec.batch_size, 100);
    }

    #[test]
    fn cnn_presets() {
        let spec = NetworkSpec::mnist_cnn(true);
        let convs: Vec<(usize, usize, usize)> = spec
            .layers
            .iter()
            .filter_map(|l| match l {
                LayerSpec::Conv {
                    depth, window, stride, ..
                } => Some((*depth, *window, *stride)),
                _ => None,
            })
            .collect();
        assert_eq!(convs, vec![(4, 5, 1), (8, 5, 2), (12, 4, 2)]);
        assert_eq!(dense_widths(&spec), vec![200, 80, 10]);
        assert_eq!(spec.learning_rate, 0.0008);
        let m = build_network(&spec).unwrap();
        // 28 → 28 → 14 → 7 under SAME padding; 7·7·12 = 588 features into FC 200
        let fc0 = m.parameters().into_iter().find(|(n, _)| n == "layer3.w").unwrap().1;
        assert_eq!(fc0.shape(), &[200, 588]);
        assert!(m.parameters().iter().all(|(n, _)| !n.starts_with("layer0.gamma")));

        let cifar = NetworkSpec::cifar10_cnn(false);
        assert_eq!((cifar.learning_rate, cifar.batch_size), (0.0006, 200));
        assert_eq!(cifar.input_shape, [32, 32, 3]);
    }

    #[test]
    fn same_seed_same_parameters() {
        let spec = NetworkSpec::mnist_fnn(true);
        assert_eq!(build_network(&spec).unwrap(), build_network(&spec).unwrap());
    }

    #[test]
    fn paired_variants_share_w_draws() {
        let a = build_network(&NetworkSpec::mnist_fnn(false)).unwrap();
        let b = build_network(&NetworkSpec::mnist_fnn(true)).unwrap();
        let wa: Vec<_> = a.parameters().into_iter().filter(|(n, _)| n.ends_with(".w")).collect();
        let wb: Vec<_> = b.parameters().into_iter().filter(|(n, _)| n.ends_with(".w")).collect();
        assert_eq!(wa, wb);
    }

    #[test]
    fn init_bounds_and_zero_biases() {
        let m = build_network(&NetworkSpec::mnist_cnn(true)).unwrap();
        for (name, t) in m.parameters() {
            if name.ends_with(".b") {
                assert!(t.data().iter().all(|&v| v == 0.0));
            } else {
                assert!(t.data().iter().all(|v| v.abs() < 0.2), "{name}");
            }
        }
    }

    #[test]
    fn gamma_ones_init() {
        let mut spec = NetworkSpec::mnist_fnn(true);
        spec.init.gamma_init = GammaInit::Ones;
        let m = build_network(&spec).unwrap();
        let gammas: Vec<_> = m
            .parameters()
            .into_iter()
            .filter(|(n, _)| n.ends_with(".gamma"))
            .collect();
        assert_eq!(gammas.len(), 5);
        assert!(gammas.iter().all(|(_, t)| t.data().iter().all(|&v| v == 1.0)));
    }

    #[test]
    fn validation_names_the_field() {
        let mut spec = NetworkSpec::mnist_fnn(false);
        spec.learning_rate = -1.0;
        let err = spec.validate().unwrap_err().to_string();
        assert!(err.contains("learning_rate"), "{err}");

        let mut spec = NetworkSpec::mnist_fnn(false);
        spec.loss = Loss::Sse;
        assert!(spec
            .validate()
            .unwrap_err()
            .to_string()
            .contains("layers[4].activation"));

        let mut spec = NetworkSpec::mnist_fnn(false);
        spec.layers[1] = dense(5, Activation::Softmax, false);
        assert!(spec
            .validate()
            .unwrap_err()
            .to_string()
            .contains("layers[1].activation"));

        let mut spec = NetworkSpec::mnist_cnn(false);
        spec.layers.swap(2, 3);
        assert!(spec.validate().is_err());
    }

    #[test]
    fn double_weight_on_conv_is_rejected_by_the_schema() {
        let json = r#"{"type":"conv","depth":4,"window":5,"stride":1,"activation":"relu","double_weight":true}"#;
        assert!(serde_json::from_str::<LayerSpec>(json).is_err());
    }

    #[test]
    fn hidden_width_override_and_scaling() {
        let spec = NetworkSpec::mnist_fnn(true).with_hidden_widths(&[50, 30]).unwrap();
        assert_eq!(dense_widths(&spec), vec![50, 30, 10]);
        assert!(spec.is_double_weight());
        let small = NetworkSpec::mnist_cnn(false).scaled(0.25).unwrap();
        assert_eq!(small.input_shape, [7, 7, 1]);
        assert_eq!(dense_widths(&small), vec![50, 20, 10]);
        assert!(NetworkSpec::mnist_fnn(false).scaled(0.0).is_err());
    }

    #[test]
    fn backward_without_forward_is_a_state_error() {
        let mut m = build_network(&NetworkSpec::mnist_fnn(false)).unwrap();
        assert!(matches!(m.backward(&Tensor::zeros(&[1, 10])), Err(Error::State(_))));
    }

    #[test]
    fn spec_json_round_trip() {
        let spec = NetworkSpec::mnist_cnn(true);
        let json = serde_json::to_string(&spec).unwrap();
        assert_eq!(serde_json::from_str::<NetworkSpec>(&json).unwrap(), spec);
    }
}
