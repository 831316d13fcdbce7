use serde::{Deserialize, Serialize};

use crate::dsp::FeatureConfig;
use crate::error::{Error, Result};
use crate::nn::{Checkpoint, Linear, LinearGrads, LstmStack, Matrix};
use crate::seed;

use super::PretrainConfig;

/// LSTM stack plus the hidden→frame projection used for future-frame prediction.
#[derive(Debug, Clone, PartialEq)]
pub struct ApcModel {
    pub lstm: LstmStack,
    pub projection: Linear,
}

/// Gradients with the same layout as [`ApcModel`].
#[derive(Debug, Clone, PartialEq)]
pub struct ApcGrads {
    pub lstm: LstmStack,
    pub projection: LinearGrads,
}

impl ApcGrads {
    pub fn zeros_like(model: &ApcModel) -> Self {
        Self {
            lstm: LstmStack::zeros_like(&model.lstm),
            projection: LinearGrads::zeros_like(&model.projection),
        }
    }

    pub fn tensors(&self) -> Vec<&Matrix> {
        let mut v = self.lstm.tensors();
        v.extend(self.projection.tensors());
        v
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Matrix> {
        let mut v = self.lstm.tensors_mut();
        v.extend(self.projection.tensors_mut());
        v
    }

    pub fn accumulate(&mut self, other: &ApcGrads) -> Result<()> {
        self.lstm.accumulate(&other.lstm)?;
        self.projection.accumulate(&other.projection)
    }

    pub fn scale(&mut self, s: f64) {
        for m in self.tensors_mut() {
            m.scale_in_place(s);
        }
    }
}

/// Configuration echo stored alongside APC checkpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApcMeta {
    pub kind: String,
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub num_layers: usize,
    pub residual: bool,
    pub pretrain_hours: f64,
    pub final_loss: Option<f64>,
    pub config: PretrainConfig,
}

impl ApcModel {
    /// Seeded uniform(±1/sqrt(fan_in)) initialization with residual upper layers.
    pub fn new(input_dim: usize, hidden_dim: usize, num_layers: usize, seed_value: u64) -> Self {
        let mut rng = seed::rng(seed_value);
        let lstm = LstmStack::new(input_dim, hidden_dim, num_layers, true, &mut rng);
        let projection = Linear::new(hidden_dim, input_dim, &mut rng);
        Self { lstm, projection }
    }

    pub fn input_dim(&self) -> usize {
        self.lstm.input_dim()
    }

    pub fn hidden_dim(&self) -> usize {
        self.lstm.hidden_dim()
    }

    pub fn named_tensors(&self) -> Vec<(String, &Matrix)> {
        let mut v = self.lstm.named_tensors();
        v.push(("proj.weight".into(), &self.projection.weight));
        v.push(("proj.bias".into(), &self.projection.bias));
        v
    }

    pub fn tensors(&self) -> Vec<&Matrix> {
        self.named_tensors().into_iter().map(|(_, m)| m).collect()
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Matrix> {
        let mut v = self.lstm.tensors_mut();
        v.extend(self.projection.tensors_mut());
        v
    }

    /// MSE between `projection(h_t)` and `x_{t+n}` for every `t` with a target.
    pub fn loss(&self, features: &Matrix, time_shift: usize) -> Result<(f64, ApcGrads)> {
        let t_len = features.rows();
        if time_shift == 0 {
            return Err(Error::Config("time shift must be at least 1".into()));
        }
        if t_len <= time_shift {
            return Err(Error::InvalidInput(format!(
                "{t_len} frames cannot supply a target {time_shift} steps ahead"
            )));
        }
        if features.cols() != self.input_dim() || self.projection.out_dim() != features.cols() {
            return Err(Error::Shape(format!(
                "model expects {}-dim features, got {}",
                self.input_dim(),
                features.cols()
            )));
        }
        let used = t_len - time_shift;
        // Outputs before `used` never depend on later inputs.
        let inputs = features.slice_rows(0, used);
        let (hidden, cache) = self.lstm.forward(&inputs)?;
        let pred = self.projection.forward(&hidden)?;
        let target = features.slice_rows(time_shift, t_len);
        let (loss, grad_pred) = crate::nn::mse_loss(&pred, &target)?;
        let (proj_grads, grad_hidden) = self.projection.backward(&hidden, &grad_pred)?;
        let (lstm_grads, _) = self.lstm.backward(&cache, &grad_hidden)?;
        Ok((
            loss,
            ApcGrads {
                lstm: lstm_grads,
                projection: proj_grads,
            },
        ))
    }

    /// Frame predictions `projection(h_t)` for every input frame.
    pub fn predict_frames(&self, features: &Matrix) -> Result<Matrix> {
        let (hidden, _) = self.lstm.forward(features)?;
        self.projection.forward(&hidden)
    }

    /// Top-layer LSTM hidden states, T×hidden.
    pub fn extract_repr(&self, features: &Matrix) -> Result<Matrix> {
        Ok(self.lstm.forward(features)?.0)
    }

    pub fn to_checkpoint(&self, meta: &ApcMeta) -> Result<Checkpoint> {
        Ok(Checkpoint {
            tensors: self
                .named_tensors()
                .into_iter()
                .map(|(n, m)| (n, m.clone()))
                .collect(),
            config_json: serde_json::to_string(meta)?,
        })
    }

    /// Rebuilds a model from checkpoint tensors, optionally under a name prefix.
    pub fn from_checkpoint_prefixed(ck: &Checkpoint, prefix: &str, num_layers: usize) -> Result<Self> {
        let get = |n: &str| ck.get(&format!("{prefix}{n}")).cloned();
        let mut layers = Vec::with_capacity(num_layers);
        for l in 0..num_layers {
            layers.push(crate::nn::LstmLayer {
                w_ih: get(&format!("lstm.{l}.w_ih"))?,
                w_hh: get(&format!("lstm.{l}.w_hh"))?,
                bias: get(&format!("lstm.{l}.bias"))?,
            });
        }
        let lstm = LstmStack {
            layers,
            residual: true,
        };
        lstm.validate()?;
        let projection = Linear::from_parts(get("proj.weight")?, get("proj.bias")?)?;
        if projection.in_dim() != lstm.hidden_dim() || projection.out_dim() != lstm.input_dim() {
            return Err(Error::Format("projection does not match the LSTM stack".into()));
        }
        Ok(Self { lstm, projection })
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<(Self, ApcMeta)> {
        let meta: ApcMeta = serde_json::from_str(&ck.config_json)?;
        if meta.kind != "apc" {
            return Err(Error::Format(format!(
                "expected an apc checkpoint, found {}",
                meta.kind
            )));
        }
        let model = Self::from_checkpoint_prefixed(ck, "", meta.num_layers)?;
        Ok((model, meta))
    }

    pub fn feature_config(meta: &ApcMeta) -> FeatureConfig {
        meta.config.features
    }
}
