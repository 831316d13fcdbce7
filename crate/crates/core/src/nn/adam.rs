use serde::{Deserialize, Serialize};

use super::Matrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Moment accumulators for a fixed list of parameter tensors.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    pub m: Vec<Matrix>,
    pub v: Vec<Matrix>,
    pub t: u64,
}

impl AdamState {
    pub fn new(config: AdamConfig, params: &[&Matrix]) -> Self {
        let zeros = |m: &&Matrix| Matrix::zeros(m.rows(), m.cols());
        Self {
            config,
            m: params.iter().map(zeros).collect(),
            v: params.iter().map(zeros).collect(),
            t: 0,
        }
    }
}

/// One bias-corrected Adam update.
///
/// Gradients are validated before anything is mutated: a shape mismatch or a
/// non-finite gradient leaves parameters and state untouched.
pub fn adam_step(params: &mut [&mut Matrix], grads: &[&Matrix], state: &mut AdamState) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(Error::Shape(format!(
            "adam: {} params, {} grads, {} moments",
            params.len(),
            grads.len(),
            state.m.len()
        )));
    }
    for (i, (p, g)) in params.iter().zip(grads).enumerate() {
        if p.shape() != g.shape() || p.shape() != state.m[i].shape() {
            return Err(Error::Shape(format!(
                "adam tensor {i}: param {:?}, grad {:?}, moment {:?}",
                p.shape(),
                g.shape(),
                state.m[i].shape()
            )));
        }
        if !g.is_finite() {
            return Err(Error::NonFinite(format!("gradient tensor {i}")));
        }
    }
    state.t += 1;
    let AdamConfig {
        lr,
        beta1,
        beta2,
        eps,
    } = state.config;
    let bc1 = 1.0 - beta1.powi(state.t as i32);
    let bc2 = 1.0 - beta2.powi(state.t as i32);
    for (i, (p, g)) in params.iter_mut().zip(grads).enumerate() {
        let m = state.m[i].data_mut();
        let v = state.v[i].data_mut();
        for (((w, &gk), mk), vk) in p.data_mut().iter_mut().zip(g.data()).zip(m).zip(v) {
            *mk = beta1 * *mk + (1.0 - beta1) * gk;
            *vk = beta2 * *vk + (1.0 - beta2) * gk * gk;
            let m_hat = *mk / bc1;
            let v_hat = *vk / bc2;
            *w -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}
