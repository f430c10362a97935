//! Adam optimizer with additive L2 weight decay.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::real::Real;
use crate::tensor::param::{GradBuffer, ParamSet};
use crate::tensor::Tensor;

/// Adam hyperparameters. L2 regularization is folded into the gradient as an
/// additive `λ·w` term before the moment updates (classic weight decay, not
/// the decoupled variant).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub l2: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { beta1: 0.9, beta2: 0.999, epsilon: 1e-8, l2: 0.0 }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.beta1 && self.beta1 < 1.0 && 0.0 < self.beta2 && self.beta2 < 1.0) {
            return Err(Error::config(format!(
                "Adam betas must lie in (0,1), got ({}, {})",
                self.beta1, self.beta2
            )));
        }
        if self.epsilon <= 0.0 {
            return Err(Error::config("Adam epsilon must be positive"));
        }
        if self.l2 < 0.0 {
            return Err(Error::config("L2 coefficient must be nonnegative"));
        }
        Ok(())
    }
}

/// Per-parameter moment accumulators and the step counter.
#[derive(Debug, Clone)]
pub struct AdamState<R: Real> {
    m: Vec<Option<Tensor<R>>>,
    v: Vec<Option<Tensor<R>>>,
    step: u64,
}

impl<R: Real> AdamState<R> {
    pub fn new(params: &ParamSet<R>) -> Self {
        AdamState {
            m: params.iter().map(|_| None).collect(),
            v: params.iter().map(|_| None).collect(),
            step: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }
}

/// One bias-corrected Adam update of every trainable parameter that has a
/// gradient. Parameters without gradients (and non-trainable buffers) are
/// untouched. Non-finite gradients abort with the parameter's name.
pub fn adam_step<R: Real>(
    params: &mut ParamSet<R>,
    grads: &GradBuffer<R>,
    state: &mut AdamState<R>,
    config: &AdamConfig,
    lr: f64,
) -> Result<()> {
    state.step += 1;
    let t = state.step;
    let b1 = R::from_f64(config.beta1);
    let b2 = R::from_f64(config.beta2);
    let one = R::one();
    let lr_r = R::from_f64(lr);
    let eps = R::from_f64(config.epsilon);
    let l2 = R::from_f64(config.l2);
    let bc1 = R::from_f64(1.0 - config.beta1.powi(t as i32));
    let bc2 = R::from_f64(1.0 - config.beta2.powi(t as i32));

    for i in 0..params.len() {
        if !params.at(i).trainable {
            continue;
        }
        let Some(g) = grads.get(i) else { continue };
        if !g.all_finite() {
            return Err(Error::NonFinite(format!(
                "gradient of {:?} at step {t}",
                params.at(i).name
            )));
        }
        let p = params.at_mut(i);
        let m = state.m[i].get_or_insert_with(|| Tensor::zeros(g.shape()));
        let v = state.v[i].get_or_insert_with(|| Tensor::zeros(g.shape()));
        for ((w, &gv), (mv, vv)) in p
            .value
            .data_mut()
            .iter_mut()
            .zip(g.data())
            .zip(m.data_mut().iter_mut().zip(v.data_mut().iter_mut()))
        {
            let grad = gv + l2 * *w;
            *mv = b1 * *mv + (one - b1) * grad;
            *vv = b2 * *vv + (one - b2) * grad * grad;
            let m_hat = *mv / bc1;
            let v_hat = *vv / bc2;
            *w -= lr_r * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}
