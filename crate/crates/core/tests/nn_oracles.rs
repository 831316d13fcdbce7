use augssl_core::apc::ApcModel;
use augssl_core::nn::gradcheck::{run_suite, LINEAR_LOSS_TOLERANCE, RECURRENT_TOLERANCE};
use augssl_core::nn::{adam_step, AdamConfig, AdamState, LayerState, LstmStack, Matrix};
use augssl_core::seed;
use proptest::prelude::*;

fn sig(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Scalar-loop LSTM stack reference: gates i, f, g, o; layers after the
/// first read `h + input` of the layer below.
fn reference(stack: &LstmStack, x: &Matrix) -> Vec<Vec<f64>> {
    let t_len = x.rows();
    let mut input: Vec<Vec<f64>> = (0..t_len).map(|t| x.row(t).to_vec()).collect();
    let mut out = Vec::new();
    for (l, layer) in stack.layers.iter().enumerate() {
        let hd = layer.hidden_dim();
        let (mut h, mut c) = (vec![0.0; hd], vec![0.0; hd]);
        let mut hs = Vec::new();
        for xt in &input {
            let mut z = vec![0.0; 4 * hd];
            for (r, zr) in z.iter_mut().enumerate() {
                let mut s = layer.bias[(0, r)];
                for (k, v) in xt.iter().enumerate() {
                    s += layer.w_ih[(r, k)] * v;
                }
                for (k, v) in h.iter().enumerate() {
                    s += layer.w_hh[(r, k)] * v;
                }
                *zr = s;
            }
            for j in 0..hd {
                let i = sig(z[j]);
                let f = sig(z[hd + j]);
                let g = z[2 * hd + j].tanh();
                let o = sig(z[3 * hd + j]);
                c[j] = f * c[j] + i * g;
                h[j] = o * c[j].tanh();
            }
            hs.push(h.clone());
        }
        out = hs.clone();
        input = if stack.residual && l >= 1 {
            hs.iter()
                .zip(&input)
                .map(|(a, b)| a.iter().zip(b).map(|(p, q)| p + q).collect())
                .collect()
        } else {
            hs
        };
    }
    out
}

fn random_input(t: usize, d: usize, s: u64) -> Matrix {
    let mut rng = seed::rng(s);
    use rand::Rng;
    Matrix::from_vec(t, d, (0..t * d).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn stack_matches_scalar_reference(s in any::<u64>(), t in 1usize..7, layers in 1usize..4, residual in any::<bool>()) {
        let stack = LstmStack::new(3, 4, layers, residual, &mut seed::rng(s));
        let x = random_input(t, 3, s ^ 1);
        let (out, _) = stack.forward(&x).unwrap();
        let want = reference(&stack, &x);
        for (r, row) in want.iter().enumerate() {
            for (c, v) in row.iter().enumerate() {
                prop_assert!((out[(r, c)] - v).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn state_threading_equals_one_pass(s in any::<u64>(), split in 1usize..9) {
        let stack = LstmStack::new(3, 5, 3, true, &mut seed::rng(s));
        let x = random_input(10, 3, s ^ 2);
        let (whole, _, fin_whole) = stack.forward_with_state(&x, None).unwrap();
        let (a, _, mid) = stack.forward_with_state(&x.slice_rows(0, split), None).unwrap();
        let (b, _, fin) = stack.forward_with_state(&x.slice_rows(split, 10), Some(&mid)).unwrap();
        for t in 0..10 {
            let got = if t < split { a.row(t) } else { b.row(t - split) };
            for (u, v) in got.iter().zip(whole.row(t)) {
                prop_assert!((u - v).abs() <= 1e-12);
            }
        }
        for (p, q) in fin.iter().zip(&fin_whole) {
            for (u, v) in p.h.iter().zip(&q.h).chain(p.c.iter().zip(&q.c)) {
                prop_assert!((u - v).abs() <= 1e-12);
            }
        }
    }
}

#[test]
fn zero_state_is_the_default() {
    let stack = LstmStack::new(2, 3, 2, true, &mut seed::rng(4));
    let x = random_input(4, 2, 5);
    let zeros = vec![LayerState::zeros(3); 2];
    let (a, _, _) = stack.forward_with_state(&x, None).unwrap();
    let (b, _, _) = stack.forward_with_state(&x, Some(&zeros)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn apc_loss_targets_frames_n_ahead() {
    // x_t = t in every dimension; a constant predictor b = 6 gives
    // mean over t = 3..9 of (t - 6)^2 = 28 / 7 = 4
    let (t_len, d, n) = (10, 4, 3);
    let x = Matrix::from_vec(t_len, d, (0..t_len * d).map(|i| (i / d) as f64).collect()).unwrap();
    let mut model = ApcModel::new(d, 5, 3, 1);
    model.projection.weight = Matrix::zeros(d, 5);
    model.projection.bias = Matrix::filled(1, d, 6.0);
    let (loss, _) = model.loss(&x, n).unwrap();
    assert!((loss - 4.0).abs() < 1e-12, "{loss}");
    model.projection.bias = Matrix::filled(1, d, 0.0);
    let (loss0, _) = model.loss(&x, n).unwrap();
    let want = (3..10).map(|t| (t * t) as f64).sum::<f64>() / 7.0;
    assert!((loss0 - want).abs() < 1e-12);
}

#[test]
fn apc_is_causal() {
    let model = ApcModel::new(3, 6, 3, 2);
    let x = random_input(8, 3, 3);
    let mut y = x.clone();
    y.row_mut(7).iter_mut().for_each(|v| *v += 5.0);
    let px = model.predict_frames(&x).unwrap();
    let py = model.predict_frames(&y).unwrap();
    assert_eq!(px.slice_rows(0, 7), py.slice_rows(0, 7));
    assert_ne!(px.row(7), py.row(7));
}

#[test]
fn adam_matches_scalar_recurrence() {
    let cfg = AdamConfig {
        lr: 0.01,
        ..Default::default()
    };
    let mut p = Matrix::from_vec(1, 2, vec![0.5, -1.0]).unwrap();
    let mut state = AdamState::new(cfg, &[&p]);
    let (mut w, mut m, mut v) = ([0.5f64, -1.0], [0.0f64; 2], [0.0f64; 2]);
    for step in 1..=5 {
        let g = [2.0 * w[0] + 0.1 * step as f64, w[1].powi(3)];
        let gm = Matrix::from_vec(1, 2, g.to_vec()).unwrap();
        adam_step(&mut [&mut p], &[&gm], &mut state).unwrap();
        for k in 0..2 {
            m[k] = 0.9 * m[k] + 0.1 * g[k];
            v[k] = 0.999 * v[k] + 0.001 * g[k] * g[k];
            let mh = m[k] / (1.0 - 0.9f64.powi(step));
            let vh = v[k] / (1.0 - 0.999f64.powi(step));
            w[k] -= 0.01 * mh / (vh.sqrt() + 1e-8);
        }
        for k in 0..2 {
            assert!((p[(0, k)] - w[k]).abs() < 1e-15, "step {step}");
        }
    }
}

#[test]
fn gradient_suite_small() {
    for e in run_suite(3, 17).unwrap() {
        let tol = if e.name.starts_with("lstm") || e.name.starts_with("apc") {
            RECURRENT_TOLERANCE
        } else {
            LINEAR_LOSS_TOLERANCE
        };
        assert_eq!(e.tolerance, tol, "{}", e.name);
        assert!(e.passed, "{}: {}", e.name, e.max_rel_error);
    }
}
