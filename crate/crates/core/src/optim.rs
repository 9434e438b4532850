//! Adam and plain SGD.

use crate::error::{Error, Result};
use crate::network::OptimizerSpec;
use crate::tensor::Tensor;

/// First/second moment estimates, one pair per parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<Tensor>,
    pub v: Vec<Tensor>,
    pub t: u64,
}

impl AdamState {
    pub fn new(params: &[&Tensor]) -> Self {
        AdamState {
            m: params.iter().map(|p| Tensor::zeros(p.shape())).collect(),
            v: params.iter().map(|p| Tensor::zeros(p.shape())).collect(),
            t: 0,
        }
    }
}

fn check_shapes(params: &[&mut Tensor], grads: &[Tensor]) -> Result<()> {
    if params.len() != grads.len() {
        return Err(Error::Argument(format!(
            "{} parameter tensors but {} gradients",
            params.len(),
            grads.len()
        )));
    }
    for (p, g) in params.iter().zip(grads) {
        if p.shape() != g.shape() {
            return Err(Error::dim("optimizer step", p.shape(), g.shape()));
        }
    }
    Ok(())
}

/// One bias-corrected Adam update:
/// `m ← β1·m + (1−β1)·g`, `v ← β2·v + (1−β2)·g²`, `θ ← θ − lr·m̂ / (√v̂ + ε)`.
pub fn adam_step(
    params: &mut [&mut Tensor],
    grads: &[Tensor],
    state: &mut AdamState,
    lr: f64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
) -> Result<()> {
    check_shapes(params, grads)?;
    if state.m.len() != params.len() {
        return Err(Error::State("Adam state does not match the parameter list".into()));
    }
    state.t += 1;
    let t = state.t as f64;
    let c1 = 1.0 - beta1.powf(t);
    let c2 = 1.0 - beta2.powf(t);
    for (((p, g), m), v) in params.iter_mut().zip(grads).zip(&mut state.m).zip(&mut state.v) {
        for (((pi, &gi), mi), vi) in p
            .data_mut()
            .iter_mut()
            .zip(g.data())
            .zip(m.data_mut())
            .zip(v.data_mut())
        {
            *mi = beta1 * *mi + (1.0 - beta1) * gi;
            *vi = beta2 * *vi + (1.0 - beta2) * gi * gi;
            let m_hat = *mi / c1;
            let v_hat = *vi / c2;
            *pi -= lr * m_hat / (v_hat.sqrt() + epsilon);
        }
    }
    Ok(())
}

pub fn sgd_step(params: &mut [&mut Tensor], grads: &[Tensor], lr: f64) -> Result<()> {
    check_shapes(params, grads)?;
    for (p, g) in params.iter_mut().zip(grads) {
        for (pi, &gi) in p.data_mut().iter_mut().zip(g.data()) {
            *pi -= lr * gi;
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub enum Optimizer {
    Adam {
        beta1: f64,
        beta2: f64,
        epsilon: f64,
        state: AdamState,
    },
    Sgd,
}

impl Optimizer {
    pub fn new(spec: &OptimizerSpec, params: &[&Tensor]) -> Self {
        match *spec {
            OptimizerSpec::Adam { beta1, beta2, epsilon } => Optimizer::Adam {
                beta1,
                beta2,
                epsilon,
                state: AdamState::new(params),
            },
            OptimizerSpec::Sgd => Optimizer::Sgd,
        }
    }

    pub fn step(&mut self, params: &mut [&mut Tensor], grads: &[Tensor], lr: f64) -> Result<()> {
        match self {
            Optimizer::Adam {
                beta1,
                beta2,
                epsilon,
                state,
            } => adam_step(params, grads, state, lr, *beta1, *beta2, *epsilon),
            Optimizer::Sgd => sgd_step(params, grads, lr),
        }
    }

    pub fn adam_state(&self) -> Option<&AdamState> {
        match self {
            Optimizer::Adam { state, .. } => Some(state),
            Optimizer::Sgd => None,
        }
    }

    pub fn adam_state_mut(&mut self) -> Option<&mut AdamState> {
        match self {
            Optimizer::Adam { state, .. } => Some(state),
            Optimizer::Sgd => None,
        }
    }
}
