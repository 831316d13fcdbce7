use super::Matrix;
use crate::error::{Error, Result};

/// Mean squared error over all elements and its gradient w.r.t. `pred`.
pub fn mse_loss(pred: &Matrix, target: &Matrix) -> Result<(f64, Matrix)> {
    if pred.shape() != target.shape() {
        return Err(Error::Shape(format!(
            "mse: pred {:?} vs target {:?}",
            pred.shape(),
            target.shape()
        )));
    }
    let n = pred.len().max(1) as f64;
    let diff = pred.sub(target)?;
    let loss = diff.data().iter().map(|d| d * d).sum::<f64>() / n;
    let grad = diff.map(|d| 2.0 * d / n);
    Ok((loss, grad))
}

/// Numerically stable log-softmax of one vector.
pub fn log_softmax(x: &[f64]) -> Vec<f64> {
    let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + x.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
    x.iter().map(|v| v - lse).collect()
}

/// Row-wise log-softmax.
pub fn log_softmax_rows(x: &Matrix) -> Matrix {
    let mut out = Matrix::zeros(x.rows(), x.cols());
    for r in 0..x.rows() {
        out.row_mut(r).copy_from_slice(&log_softmax(x.row(r)));
    }
    out
}

/// Mean negative log-likelihood over frames.
///
/// `log_probs` must be the row-wise log-softmax of some logits; the returned
/// gradient is with respect to those logits, `(softmax - onehot) / T`.
pub fn cross_entropy_from_log_probs(log_probs: &Matrix, labels: &[u32]) -> Result<(f64, Matrix)> {
    if labels.len() != log_probs.rows() {
        return Err(Error::Shape(format!(
            "{} labels for {} frames",
            labels.len(),
            log_probs.rows()
        )));
    }
    let k = log_probs.cols();
    if let Some(&bad) = labels.iter().find(|&&l| l as usize >= k) {
        return Err(Error::LabelOutOfRange {
            label: bad as usize,
            num_classes: k,
        });
    }
    let t = labels.len().max(1) as f64;
    let mut loss = 0.0;
    let mut grad = log_probs.map(f64::exp);
    for (r, &l) in labels.iter().enumerate() {
        loss -= log_probs[(r, l as usize)];
        grad[(r, l as usize)] -= 1.0;
    }
    grad.scale_in_place(1.0 / t);
    Ok((loss / t, grad))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mse_basics() {
        let a = Matrix::filled(3, 4, 0.5);
        let (l, g) = mse_loss(&a, &a).unwrap();
        assert_eq!(l, 0.0);
        assert!(g.data().iter().all(|&v| v == 0.0));
        let (l, _) = mse_loss(&Matrix::filled(3, 4, 1.5), &a).unwrap();
        assert_eq!(l, 1.0);
        assert!(mse_loss(&a, &Matrix::zeros(4, 3)).is_err());
    }

    #[test]
    fn uniform_log_softmax() {
        for v in log_softmax(&[2.0; 7]) {
            assert!((v + 7f64.ln()).abs() < 1e-15);
        }
    }

    #[test]
    fn log_softmax_survives_large_inputs() {
        let out = log_softmax(&[1000.0, 0.0, -1000.0]);
        assert!(out.iter().all(|v| v.is_finite() || *v == f64::NEG_INFINITY));
        assert!(out[0].abs() < 1e-12);
    }

    #[test]
    fn uniform_cross_entropy_is_ln_k() {
        let lp = log_softmax_rows(&Matrix::zeros(4, 5));
        let (l, _) = cross_entropy_from_log_probs(&lp, &[0, 1, 4, 2]).unwrap();
        assert!((l - 5f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn confident_prediction_has_near_zero_loss() {
        let mut logits = Matrix::zeros(2, 3);
        logits[(0, 1)] = 60.0;
        logits[(1, 2)] = 60.0;
        let (l, _) = cross_entropy_from_log_probs(&log_softmax_rows(&logits), &[1, 2]).unwrap();
        assert!(l < 1e-20);
    }

    #[test]
    fn label_out_of_range() {
        let lp = log_softmax_rows(&Matrix::zeros(1, 3));
        assert!(matches!(
            cross_entropy_from_log_probs(&lp, &[3]),
            Err(Error::LabelOutOfRange {
                label: 3,
                num_classes: 3
            })
        ));
    }
}
