//! Losses and the Adam optimizer.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

pub const PROB_FLOOR: f64 = 1e-12;

/// Numerically stable softmax.
pub fn softmax<T: Real>(logits: &[T]) -> Vec<T> {
    let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let exps: Vec<T> = logits.iter().map(|&z| (z - max).exp()).collect();
    let total: T = exps.iter().copied().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Cross-entropy of a probability vector against `label`, together with the
/// gradient with respect to the pre-softmax logits (`probs - onehot`).
pub fn cross_entropy<T: Real>(probs: &[T], label: usize) -> Result<(T, Vec<T>)> {
    if label >= probs.len() {
        return Err(Error::Dimension { what: "class label", expected: probs.len(), got: label + 1 });
    }
    let floor = T::lit(PROB_FLOOR);
    let p = probs[label];
    if p.is_nan() {
        return Err(Error::NonFinite("probability in cross-entropy".into()));
    }
    if p < floor {
        warn!("probability of true class {} below {PROB_FLOOR}; clamping", p);
    }
    let loss = -p.max(floor).ln();
    let mut grad = probs.to_vec();
    grad[label] -= T::one();
    Ok((loss, grad))
}

/// Mean squared error between one prediction and its target, with gradient
/// with respect to the prediction.
pub fn squared_error<T: Real>(pred: T, target: T) -> (T, T) {
    let d = pred - target;
    (d * d, T::lit(2.0) * d)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        Self { lr, ..Self::default() }
    }
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { lr: 0.01, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// First and second moment estimates plus the step counter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState<T> {
    pub m: Vec<T>,
    pub v: Vec<T>,
    pub t: u64,
}

impl<T: Real> AdamState<T> {
    pub fn new(n: usize) -> Self {
        Self { m: vec![T::zero(); n], v: vec![T::zero(); n], t: 0 }
    }
}

/// One bias-corrected Adam update, in place. Aborts on any non-finite
/// gradient before touching the parameters.
pub fn adam_step<T: Real>(
    params: &mut [T],
    grads: &[T],
    state: &mut AdamState<T>,
    config: &AdamConfig,
) -> Result<()> {
    if params.len() != grads.len() || state.m.len() != params.len() {
        return Err(Error::Dimension { what: "Adam parameter/gradient length", expected: params.len(), got: grads.len() });
    }
    if let Some(i) = grads.iter().position(|g| !g.is_finite()) {
        return Err(Error::NonFinite(format!("gradient component {i} is {}", grads[i])));
    }
    state.t += 1;
    let (b1, b2) = (T::lit(config.beta1), T::lit(config.beta2));
    let lr = T::lit(config.lr);
    let eps = T::lit(config.eps);
    let bc1 = T::one() - b1.powi(state.t as i32);
    let bc2 = T::one() - b2.powi(state.t as i32);
    for i in 0..params.len() {
        let g = grads[i];
        state.m[i] = b1 * state.m[i] + (T::one() - b1) * g;
        state.v[i] = b2 * state.v[i] + (T::one() - b2) * g * g;
        let m_hat = state.m[i] / bc1;
        let v_hat = state.v[i] / bc2;
        params[i] -= lr * m_hat / (v_hat.sqrt() + eps);
    }
    Ok(())
}
