//! Stacked LSTM with residual connections between the upper layers.
//!
//! Gate rows in every 4H-sized block are ordered input, forget, cell, output.
//! Layer `l >= 2` reads `h[l-1] + input[l-1]`, so with three layers the top
//! layer sees the sum of the first two layers' outputs.

use rand::Rng;

use super::{init_uniform, Matrix};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct LstmLayer {
    /// 4H×in
    pub w_ih: Matrix,
    /// 4H×H
    pub w_hh: Matrix,
    /// 1×4H
    pub bias: Matrix,
}

impl LstmLayer {
    pub fn new(input_dim: usize, hidden_dim: usize, rng: &mut impl Rng) -> Self {
        Self {
            w_ih: init_uniform(4 * hidden_dim, input_dim, hidden_dim, rng),
            w_hh: init_uniform(4 * hidden_dim, hidden_dim, hidden_dim, rng),
            bias: init_uniform(1, 4 * hidden_dim, hidden_dim, rng),
        }
    }

    pub fn zeros_like(other: &LstmLayer) -> Self {
        Self {
            w_ih: Matrix::zeros(other.w_ih.rows(), other.w_ih.cols()),
            w_hh: Matrix::zeros(other.w_hh.rows(), other.w_hh.cols()),
            bias: Matrix::zeros(1, other.bias.cols()),
        }
    }

    pub fn hidden_dim(&self) -> usize {
        self.w_hh.cols()
    }

    pub fn input_dim(&self) -> usize {
        self.w_ih.cols()
    }

    fn check(&self) -> Result<()> {
        let h = self.hidden_dim();
        if self.w_hh.rows() != 4 * h || self.w_ih.rows() != 4 * h || self.bias.shape() != (1, 4 * h) {
            return Err(Error::Shape(format!(
                "inconsistent LSTM layer: w_ih {:?}, w_hh {:?}, bias {:?}",
                self.w_ih.shape(),
                self.w_hh.shape(),
                self.bias.shape()
            )));
        }
        Ok(())
    }

    fn forward(&self, x: &Matrix, init: &LayerState) -> Result<(Matrix, LayerCache, LayerState)> {
        let h_dim = self.hidden_dim();
        let t_len = x.rows();
        let mut pre = x.matmul_t(&self.w_ih)?;
        pre.add_row_broadcast(self.bias.data())?;

        let mut gates = Matrix::zeros(t_len, 4 * h_dim);
        let mut cells = Matrix::zeros(t_len, h_dim);
        let mut tanh_c = Matrix::zeros(t_len, h_dim);
        let mut hidden = Matrix::zeros(t_len, h_dim);
        let mut h_prev = init.h.clone();
        let mut c_prev = init.c.clone();
        let mut z = vec![0.0; 4 * h_dim];

        for t in 0..t_len {
            z.copy_from_slice(pre.row(t));
            for (j, zj) in z.iter_mut().enumerate() {
                *zj += dot(self.w_hh.row(j), &h_prev);
            }
            let g_row = gates.row_mut(t);
            for j in 0..h_dim {
                g_row[j] = sigmoid(z[j]);
                g_row[h_dim + j] = sigmoid(z[h_dim + j]);
                g_row[2 * h_dim + j] = z[2 * h_dim + j].tanh();
                g_row[3 * h_dim + j] = sigmoid(z[3 * h_dim + j]);
            }
            let g_row = gates.row(t).to_vec();
            for j in 0..h_dim {
                let (i, f, g, o) = (
                    g_row[j],
                    g_row[h_dim + j],
                    g_row[2 * h_dim + j],
                    g_row[3 * h_dim + j],
                );
                let c = f * c_prev[j] + i * g;
                let tc = c.tanh();
                cells[(t, j)] = c;
                tanh_c[(t, j)] = tc;
                hidden[(t, j)] = o * tc;
            }
            h_prev.copy_from_slice(hidden.row(t));
            c_prev.copy_from_slice(cells.row(t));
        }

        let cache = LayerCache {
            input: x.clone(),
            gates,
            cells,
            tanh_c,
            hidden: hidden.clone(),
            init: init.clone(),
        };
        Ok((hidden, cache, LayerState { h: h_prev, c: c_prev }))
    }

    /// BPTT through one layer. Returns parameter gradients and `dL/dx`.
    fn backward(&self, cache: &LayerCache, grad_h: &Matrix) -> Result<(LstmLayer, Matrix)> {
        let h_dim = self.hidden_dim();
        let t_len = cache.hidden.rows();
        if grad_h.shape() != (t_len, h_dim) {
            return Err(Error::Shape(format!(
                "LSTM backward: grad {:?}, expected ({t_len}, {h_dim})",
                grad_h.shape()
            )));
        }
        let mut dz = Matrix::zeros(t_len, 4 * h_dim);
        let mut dh_next = vec![0.0; h_dim];
        let mut dc_next = vec![0.0; h_dim];

        for t in (0..t_len).rev() {
            let g = cache.gates.row(t);
            let c_prev = if t == 0 {
                &cache.init.c[..]
            } else {
                cache.cells.row(t - 1)
            };
            let tc = cache.tanh_c.row(t);
            let dh_row = grad_h.row(t);
            let dz_row = dz.row_mut(t);
            for j in 0..h_dim {
                let (i, f, gg, o) = (g[j], g[h_dim + j], g[2 * h_dim + j], g[3 * h_dim + j]);
                let dh = dh_row[j] + dh_next[j];
                let d_o = dh * tc[j];
                let dc = dc_next[j] + dh * o * (1.0 - tc[j] * tc[j]);
                let d_i = dc * gg;
                let d_g = dc * i;
                let d_f = dc * c_prev[j];
                dc_next[j] = dc * f;
                dz_row[j] = d_i * i * (1.0 - i);
                dz_row[h_dim + j] = d_f * f * (1.0 - f);
                dz_row[2 * h_dim + j] = d_g * (1.0 - gg * gg);
                dz_row[3 * h_dim + j] = d_o * o * (1.0 - o);
            }
            dh_next.iter_mut().for_each(|v| *v = 0.0);
            let dz_row = dz.row(t);
            for (k, &d) in dz_row.iter().enumerate() {
                if d != 0.0 {
                    for (acc, w) in dh_next.iter_mut().zip(self.w_hh.row(k)) {
                        *acc += d * w;
                    }
                }
            }
        }

        let mut h_prev = Matrix::zeros(t_len, h_dim);
        h_prev.row_mut(0).copy_from_slice(&cache.init.h);
        for t in 1..t_len {
            h_prev.row_mut(t).copy_from_slice(cache.hidden.row(t - 1));
        }
        let mut grads = LstmLayer::zeros_like(self);
        dz.add_t_matmul_into(&cache.input, &mut grads.w_ih)?;
        dz.add_t_matmul_into(&h_prev, &mut grads.w_hh)?;
        grads.bias = dz.sum_rows();
        let grad_x = dz.matmul(&self.w_ih)?;
        Ok((grads, grad_x))
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Hidden and cell state of one layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerState {
    pub h: Vec<f64>,
    pub c: Vec<f64>,
}

impl LayerState {
    pub fn zeros(hidden_dim: usize) -> Self {
        Self {
            h: vec![0.0; hidden_dim],
            c: vec![0.0; hidden_dim],
        }
    }
}

#[derive(Debug, Clone)]
struct LayerCache {
    input: Matrix,
    gates: Matrix,
    cells: Matrix,
    tanh_c: Matrix,
    hidden: Matrix,
    init: LayerState,
}

/// Activations retained by [`LstmStack::forward`] for the backward pass.
#[derive(Debug, Clone)]
pub struct LstmCache {
    layers: Vec<LayerCache>,
    input_shape: (usize, usize),
}

/// A stack of LSTM layers. Also used as the gradient container.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmStack {
    pub layers: Vec<LstmLayer>,
    pub residual: bool,
}

impl LstmStack {
    pub fn new(
        input_dim: usize,
        hidden_dim: usize,
        num_layers: usize,
        residual: bool,
        rng: &mut impl Rng,
    ) -> Self {
        let layers = (0..num_layers)
            .map(|l| LstmLayer::new(if l == 0 { input_dim } else { hidden_dim }, hidden_dim, rng))
            .collect();
        Self { layers, residual }
    }

    pub fn zeros_like(other: &LstmStack) -> Self {
        Self {
            layers: other.layers.iter().map(LstmLayer::zeros_like).collect(),
            residual: other.residual,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim()
    }

    pub fn hidden_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].hidden_dim()
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::Shape("LSTM stack has no layers".into()));
        }
        let h = self.layers[0].hidden_dim();
        for (l, layer) in self.layers.iter().enumerate() {
            layer.check()?;
            if layer.hidden_dim() != h || (l > 0 && layer.input_dim() != h) {
                return Err(Error::Shape(format!(
                    "layer {l} dimensions disagree with the stack"
                )));
            }
        }
        Ok(())
    }

    /// Parameter tensors in checkpoint order with their names.
    pub fn named_tensors(&self) -> Vec<(String, &Matrix)> {
        self.layers
            .iter()
            .enumerate()
            .flat_map(|(l, layer)| {
                [
                    (format!("lstm.{l}.w_ih"), &layer.w_ih),
                    (format!("lstm.{l}.w_hh"), &layer.w_hh),
                    (format!("lstm.{l}.bias"), &layer.bias),
                ]
            })
            .collect()
    }

    pub fn tensors(&self) -> Vec<&Matrix> {
        self.named_tensors().into_iter().map(|(_, m)| m).collect()
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Matrix> {
        self.layers
            .iter_mut()
            .flat_map(|l| [&mut l.w_ih, &mut l.w_hh, &mut l.bias])
            .collect()
    }

    pub fn accumulate(&mut self, other: &LstmStack) -> Result<()> {
        for (a, b) in self.tensors_mut().into_iter().zip(other.tensors()) {
            a.add_assign(b)?;
        }
        Ok(())
    }

    /// Runs the stack from zero initial state. `inputs` is T×input_dim.
    pub fn forward(&self, inputs: &Matrix) -> Result<(Matrix, LstmCache)> {
        let (out, cache, _) = self.forward_with_state(inputs, None)?;
        Ok((out, cache))
    }

    /// Runs the stack from the given per-layer states (zero when `None`) and
    /// also returns the final states.
    pub fn forward_with_state(
        &self,
        inputs: &Matrix,
        init: Option<&[LayerState]>,
    ) -> Result<(Matrix, LstmCache, Vec<LayerState>)> {
        if inputs.cols() != self.input_dim() {
            return Err(Error::Shape(format!(
                "LSTM expects input width {}, got {}",
                self.input_dim(),
                inputs.cols()
            )));
        }
        if inputs.rows() == 0 {
            return Err(Error::Shape("LSTM input has no frames".into()));
        }
        if let Some(states) = init {
            if states.len() != self.layers.len() {
                return Err(Error::Shape(
                    "initial state count differs from layer count".into(),
                ));
            }
        }
        let mut caches = Vec::with_capacity(self.layers.len());
        let mut finals = Vec::with_capacity(self.layers.len());
        let mut layer_input = inputs.clone();
        let mut out = Matrix::zeros(0, 0);
        for (l, layer) in self.layers.iter().enumerate() {
            let zero = LayerState::zeros(layer.hidden_dim());
            let state = init.map_or(&zero, |s| &s[l]);
            if state.h.len() != layer.hidden_dim() || state.c.len() != layer.hidden_dim() {
                return Err(Error::Shape(format!(
                    "initial state of layer {l} has wrong width"
                )));
            }
            let (h, cache, fin) = layer.forward(&layer_input, state)?;
            caches.push(cache);
            finals.push(fin);
            let next = if self.residual && l >= 1 {
                h.add(&layer_input)?
            } else {
                h.clone()
            };
            layer_input = next;
            out = h;
        }
        Ok((
            out,
            LstmCache {
                layers: caches,
                input_shape: inputs.shape(),
            },
            finals,
        ))
    }

    /// Exact gradients of the forward pass for upstream gradient `grad_hidden`
    /// on the top layer's outputs. Returns parameter gradients and `dL/dinputs`.
    pub fn backward(&self, cache: &LstmCache, grad_hidden: &Matrix) -> Result<(LstmStack, Matrix)> {
        if cache.layers.len() != self.layers.len() {
            return Err(Error::Shape("cache does not match this stack".into()));
        }
        let n = self.layers.len();
        let t_len = cache.input_shape.0;
        if grad_hidden.shape() != (t_len, self.hidden_dim()) {
            return Err(Error::Shape(format!(
                "grad_hidden {:?}, expected ({t_len}, {})",
                grad_hidden.shape(),
                self.hidden_dim()
            )));
        }
        let mut grads = LstmStack::zeros_like(self);
        let mut grad_h: Vec<Matrix> = self
            .layers
            .iter()
            .map(|l| Matrix::zeros(t_len, l.hidden_dim()))
            .collect();
        let mut extra: Vec<Option<Matrix>> = vec![None; n];
        grad_h[n - 1] = grad_hidden.clone();
        let mut grad_input = Matrix::zeros(0, 0);
        for l in (0..n).rev() {
            let (g, mut dx) = self.layers[l].backward(&cache.layers[l], &grad_h[l])?;
            grads.layers[l] = g;
            if let Some(e) = extra[l].take() {
                dx.add_assign(&e)?;
            }
            if l >= 1 {
                grad_h[l - 1].add_assign(&dx)?;
            }
            if self.residual && l >= 2 {
                extra[l - 1] = Some(dx.clone());
            }
            if l == 0 {
                grad_input = dx;
            }
        }
        Ok((grads, grad_input))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;

    #[test]
    fn zero_weights_zero_output() {
        let mut s = LstmStack::new(80, 16, 3, true, &mut seed::rng(1));
        for m in s.tensors_mut() {
            m.data_mut().iter_mut().for_each(|v| *v = 0.0);
        }
        let (h, _) = s.forward(&Matrix::zeros(7, 80)).unwrap();
        assert_eq!(h.shape(), (7, 16));
        assert!(h.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn wrong_width_rejected() {
        let s = LstmStack::new(4, 8, 2, true, &mut seed::rng(1));
        assert!(s.forward(&Matrix::zeros(3, 5)).is_err());
        assert!(s.forward(&Matrix::zeros(0, 4)).is_err());
    }

    #[test]
    fn zero_upstream_gives_zero_grads() {
        let s = LstmStack::new(4, 8, 3, true, &mut seed::rng(2));
        let x = Matrix::from_vec(5, 4, (0..20).map(|i| (i as f64 * 0.3).sin()).collect()).unwrap();
        let (_, cache) = s.forward(&x).unwrap();
        let (g, dx) = s.backward(&cache, &Matrix::zeros(5, 8)).unwrap();
        assert!(g.tensors().iter().all(|m| m.data().iter().all(|&v| v == 0.0)));
        assert_eq!(dx.shape(), x.shape());
    }

    #[test]
    fn sigmoid_is_stable() {
        assert_eq!(sigmoid(-1000.0), 0.0);
        assert_eq!(sigmoid(1000.0), 1.0);
        assert!((sigmoid(0.0) - 0.5).abs() < 1e-15);
    }
}
