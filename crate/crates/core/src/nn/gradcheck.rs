//! Central finite-difference gradient checking.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::Serialize;

use super::{cross_entropy_from_log_probs, flatten, log_softmax_rows, mse_loss, unflatten};
use super::{Linear, LstmStack, Matrix};
use crate::apc::ApcModel;
use crate::error::Result;
use crate::seed;

#[derive(Debug, Clone, Copy)]
pub struct GradCheckConfig {
    /// Finite-difference step.
    pub step: f64,
    /// Coordinates to probe; `None` checks all of them.
    pub num_coords: Option<usize>,
    pub seed: u64,
    pub tolerance: f64,
    /// Lower bound on the relative-error denominator.
    pub abs_floor: f64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self {
            step: 1e-4,
            num_coords: None,
            seed: 0,
            tolerance: 1e-3,
            abs_floor: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub max_abs_error: f64,
    pub worst_index: usize,
    pub coords_checked: usize,
    pub tolerance: f64,
    pub passed: bool,
}

/// Compares `analytic` with central differences of `f` around `params`.
pub fn grad_check(
    mut f: impl FnMut(&[f64]) -> f64,
    params: &[f64],
    analytic: &[f64],
    config: &GradCheckConfig,
) -> GradCheckReport {
    assert_eq!(params.len(), analytic.len(), "gradient length mismatch");
    let mut coords: Vec<usize> = (0..params.len()).collect();
    if let Some(k) = config.num_coords {
        if k < coords.len() {
            coords.shuffle(&mut seed::rng(config.seed));
            coords.truncate(k);
            coords.sort_unstable();
        }
    }
    let mut x = params.to_vec();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        max_abs_error: 0.0,
        worst_index: 0,
        coords_checked: coords.len(),
        tolerance: config.tolerance,
        passed: true,
    };
    for &i in &coords {
        let orig = x[i];
        x[i] = orig + config.step;
        let up = f(&x);
        x[i] = orig - config.step;
        let down = f(&x);
        x[i] = orig;
        let numeric = (up - down) / (2.0 * config.step);
        let abs = (numeric - analytic[i]).abs();
        let denom = numeric.abs().max(analytic[i].abs()).max(config.abs_floor);
        let rel = abs / denom;
        if !(rel <= report.max_rel_error) {
            report.max_rel_error = rel;
            report.worst_index = i;
        }
        report.max_abs_error = report.max_abs_error.max(abs);
    }
    report.passed = report.max_rel_error <= config.tolerance;
    report
}

fn random_matrix(rows: usize, cols: usize, scale: f64, rng: &mut impl Rng) -> Matrix {
    let data = (0..rows * cols).map(|_| rng.gen_range(-scale..scale)).collect();
    Matrix::from_vec(rows, cols, data).expect("sized")
}

fn weighted_sum(a: &Matrix, w: &Matrix) -> f64 {
    a.data().iter().zip(w.data()).map(|(x, y)| x * y).sum()
}

/// Gradient check of a linear layer (parameters and input) under `sum(y ⊙ R)`.
pub fn check_linear(seed_value: u64, config: &GradCheckConfig) -> Result<GradCheckReport> {
    let mut rng = seed::rng(seed_value);
    let layer = Linear::new(6, 4, &mut rng);
    let x = random_matrix(5, 6, 1.0, &mut rng);
    let r = random_matrix(5, 4, 1.0, &mut rng);
    let (grads, grad_x) = layer.backward(&x, &r)?;
    let mut flat = flatten(&layer.tensors());
    let n_params = flat.len();
    flat.extend_from_slice(x.data());
    let mut analytic = flatten(&grads.tensors());
    analytic.extend_from_slice(grad_x.data());
    let f = |v: &[f64]| {
        let mut l = layer.clone();
        unflatten(&mut l.tensors_mut(), &v[..n_params]);
        let xi = Matrix::from_vec(5, 6, v[n_params..].to_vec()).expect("sized");
        weighted_sum(&l.forward(&xi).expect("shapes"), &r)
    };
    Ok(grad_check(f, &flat, &analytic, config))
}

pub fn check_mse(seed_value: u64, config: &GradCheckConfig) -> Result<GradCheckReport> {
    let mut rng = seed::rng(seed_value);
    let pred = random_matrix(5, 3, 1.0, &mut rng);
    let target = random_matrix(5, 3, 1.0, &mut rng);
    let (_, grad) = mse_loss(&pred, &target)?;
    let f = |v: &[f64]| {
        let p = Matrix::from_vec(5, 3, v.to_vec()).expect("sized");
        mse_loss(&p, &target).expect("shapes").0
    };
    Ok(grad_check(f, pred.data(), grad.data(), config))
}

/// Cross-entropy through log-softmax, differentiated w.r.t. the logits.
pub fn check_cross_entropy(seed_value: u64, config: &GradCheckConfig) -> Result<GradCheckReport> {
    let mut rng = seed::rng(seed_value);
    let (t, k) = (6, 4);
    let logits = random_matrix(t, k, 2.0, &mut rng);
    let labels: Vec<u32> = (0..t).map(|_| rng.gen_range(0..k as u32)).collect();
    let (_, grad) = cross_entropy_from_log_probs(&log_softmax_rows(&logits), &labels)?;
    let f = |v: &[f64]| {
        let z = Matrix::from_vec(t, k, v.to_vec()).expect("sized");
        cross_entropy_from_log_probs(&log_softmax_rows(&z), &labels)
            .expect("labels")
            .0
    };
    Ok(grad_check(f, logits.data(), grad.data(), config))
}

/// LSTM stack (input 4, hidden 8, three residual layers, T = 5) under
/// `sum(h ⊙ R)`, parameters and inputs.
pub fn check_lstm(seed_value: u64, config: &GradCheckConfig) -> Result<GradCheckReport> {
    let mut rng = seed::rng(seed_value);
    let (t, d, h) = (5, 4, 8);
    let stack = LstmStack::new(d, h, 3, true, &mut rng);
    let x = random_matrix(t, d, 1.0, &mut rng);
    let r = random_matrix(t, h, 1.0, &mut rng);
    let (_, cache) = stack.forward(&x)?;
    let (grads, grad_x) = stack.backward(&cache, &r)?;
    let mut flat = flatten(&stack.tensors());
    let n_params = flat.len();
    flat.extend_from_slice(x.data());
    let mut analytic = flatten(&grads.tensors());
    analytic.extend_from_slice(grad_x.data());
    let f = |v: &[f64]| {
        let mut s = stack.clone();
        unflatten(&mut s.tensors_mut(), &v[..n_params]);
        let xi = Matrix::from_vec(t, d, v[n_params..].to_vec()).expect("sized");
        weighted_sum(&s.forward(&xi).expect("shapes").0, &r)
    };
    Ok(grad_check(f, &flat, &analytic, config))
}

/// Full APC loss on a tiny model (features 6, hidden 8, three layers, T = 10, shift 3).
pub fn check_apc(seed_value: u64, config: &GradCheckConfig) -> Result<GradCheckReport> {
    let mut rng = seed::rng(seed_value);
    let model = ApcModel::new(6, 8, 3, seed_value);
    let feats = random_matrix(10, 6, 1.0, &mut rng);
    let (_, grads) = model.loss(&feats, 3)?;
    let flat = flatten(&model.tensors());
    let analytic = flatten(&grads.tensors());
    let f = |v: &[f64]| {
        let mut m = model.clone();
        unflatten(&mut m.tensors_mut(), v);
        m.loss(&feats, 3).expect("shapes").0
    };
    Ok(grad_check(f, &flat, &analytic, config))
}

/// One row of the gradient suite.
#[derive(Debug, Clone, Serialize)]
pub struct SuiteEntry {
    pub name: &'static str,
    pub instances: usize,
    pub max_rel_error: f64,
    pub tolerance: f64,
    pub passed: bool,
}

/// Tolerances used by [`run_suite`].
pub const LINEAR_LOSS_TOLERANCE: f64 = 1e-6;
pub const RECURRENT_TOLERANCE: f64 = 1e-3;

/// Runs every backward pass against finite differences on `instances`
/// random instances each.
pub fn run_suite(instances: usize, seed_value: u64) -> Result<Vec<SuiteEntry>> {
    type Check = fn(u64, &GradCheckConfig) -> Result<GradCheckReport>;
    let exact = GradCheckConfig {
        step: 1e-5,
        tolerance: LINEAR_LOSS_TOLERANCE,
        ..Default::default()
    };
    let recurrent = GradCheckConfig {
        step: 1e-4,
        tolerance: RECURRENT_TOLERANCE,
        ..Default::default()
    };
    let checks: [(&'static str, Check, GradCheckConfig); 5] = [
        ("linear", check_linear, exact),
        ("mse_loss", check_mse, exact),
        ("cross_entropy", check_cross_entropy, exact),
        ("lstm", check_lstm, recurrent),
        ("apc_loss", check_apc, recurrent),
    ];
    checks
        .iter()
        .enumerate()
        .map(|(c, (name, check, cfg))| {
            let mut worst: f64 = 0.0;
            for i in 0..instances {
                let s = seed::split(seed::split(seed_value, c as u64), i as u64);
                worst = worst.max(check(s, cfg)?.max_rel_error);
            }
            Ok(SuiteEntry {
                name,
                instances,
                max_rel_error: worst,
                tolerance: cfg.tolerance,
                passed: worst <= cfg.tolerance,
            })
        })
        .collect()
}
