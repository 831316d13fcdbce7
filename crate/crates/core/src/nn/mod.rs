//! Dense matrices, LSTM and linear layers with hand-written backward passes,
//! losses, Adam and finite-difference gradient checking.

pub mod adam;
pub mod checkpoint;
pub mod gradcheck;
pub mod linear;
pub mod loss;
pub mod lstm;
mod matrix;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use checkpoint::Checkpoint;
pub use gradcheck::{grad_check, GradCheckConfig, GradCheckReport};
pub use linear::{Linear, LinearGrads};
pub use loss::{cross_entropy_from_log_probs, log_softmax, log_softmax_rows, mse_loss};
pub use lstm::{LayerState, LstmCache, LstmLayer, LstmStack};
pub use matrix::Matrix;

use rand::Rng;

/// Uniform(-k, k) initialization with k = 1/sqrt(fan_in).
pub(crate) fn init_uniform(rows: usize, cols: usize, fan_in: usize, rng: &mut impl Rng) -> Matrix {
    let k = 1.0 / (fan_in as f64).sqrt();
    let data = (0..rows * cols).map(|_| rng.gen_range(-k..k)).collect();
    Matrix::from_vec(rows, cols, data).expect("sized")
}

/// Flattens a parameter list into one vector.
pub fn flatten(params: &[&Matrix]) -> Vec<f64> {
    params.iter().flat_map(|m| m.data().iter().copied()).collect()
}

/// Writes a flat vector back into a parameter list.
pub fn unflatten(params: &mut [&mut Matrix], flat: &[f64]) {
    let mut off = 0;
    for m in params.iter_mut() {
        let n = m.len();
        m.data_mut().copy_from_slice(&flat[off..off + n]);
        off += n;
    }
    assert_eq!(off, flat.len(), "flat parameter length mismatch");
}

/// Global L2 norm of a gradient list.
pub fn global_norm(grads: &[&Matrix]) -> f64 {
    grads
        .iter()
        .flat_map(|m| m.data().iter())
        .map(|v| v * v)
        .sum::<f64>()
        .sqrt()
}

/// Rescales gradients so their global norm does not exceed `max_norm`.
pub fn clip_global_norm(grads: &mut [&mut Matrix], max_norm: f64) {
    let norm = grads
        .iter()
        .flat_map(|m| m.data().iter())
        .map(|v| v * v)
        .sum::<f64>()
        .sqrt();
    if norm > max_norm && norm > 0.0 {
        let s = max_norm / norm;
        for g in grads.iter_mut() {
            g.scale_in_place(s);
        }
    }
}
