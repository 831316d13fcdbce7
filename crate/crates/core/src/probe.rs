//! Frame-level phoneme probing: a linear head on top of APC representations,
//! trained with cross-entropy and scored by frame accuracy.

use log::debug;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::apc::{ApcGrads, ApcMeta, ApcModel};
use crate::audio_io::{FrameLabels, Manifest};
use crate::dsp::{extract_features, FeatureConfig};
use crate::error::{Error, Result};
use crate::nn::{
    adam_step, clip_global_norm, cross_entropy_from_log_probs, log_softmax_rows, AdamConfig, AdamState,
    Checkpoint, Linear, LinearGrads, Matrix,
};
use crate::seed;

/// What the head reads from.
#[derive(Debug, Clone, PartialEq)]
pub enum Backbone {
    Apc(ApcModel),
    /// Feeds the log-mel features straight to the head (diagnostic).
    Identity {
        dim: usize,
    },
}

impl Backbone {
    pub fn output_dim(&self) -> usize {
        match self {
            Backbone::Apc(m) => m.hidden_dim(),
            Backbone::Identity { dim } => *dim,
        }
    }

    pub fn represent(&self, features: &Matrix) -> Result<Matrix> {
        match self {
            Backbone::Apc(m) => m.extract_repr(features),
            Backbone::Identity { dim } => {
                if features.cols() != *dim {
                    return Err(Error::Shape(format!(
                        "identity backbone expects width {dim}, got {}",
                        features.cols()
                    )));
                }
                Ok(features.clone())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeModel {
    pub backbone: Backbone,
    pub head: Linear,
    pub backbone_frozen: bool,
    pub features: FeatureConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FinetuneConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub backbone_frozen: bool,
    pub seed: u64,
    pub clip_grad_norm: Option<f64>,
}

impl Default for FinetuneConfig {
    fn default() -> Self {
        Self {
            epochs: 20,
            batch_size: 32,
            learning_rate: 1e-4,
            backbone_frozen: true,
            seed: 0,
            clip_grad_norm: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FinetuneOutcome {
    pub probe: ProbeModel,
    /// Mean per-utterance cross-entropy of each epoch.
    pub loss_curve: Vec<f64>,
}

/// Frame-level scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub frame_accuracy_percent: f64,
    /// `None` for classes absent from the reference labels.
    pub per_class_accuracy: Vec<Option<f64>>,
    pub total_frames: u64,
    pub correct_frames: u64,
    /// `confusion[true][predicted]`
    pub confusion: Vec<Vec<u64>>,
}

impl EvalReport {
    fn from_confusion(confusion: Vec<Vec<u64>>) -> Self {
        let total: u64 = confusion.iter().flatten().sum();
        let correct: u64 = (0..confusion.len()).map(|k| confusion[k][k]).sum();
        let per_class = confusion
            .iter()
            .enumerate()
            .map(|(k, row)| {
                let n: u64 = row.iter().sum();
                (n > 0).then(|| 100.0 * row[k] as f64 / n as f64)
            })
            .collect();
        Self {
            frame_accuracy_percent: accuracy_percent(correct, total),
            per_class_accuracy: per_class,
            total_frames: total,
            correct_frames: correct,
            confusion,
        }
    }
}

pub fn accuracy_percent(correct: u64, total: u64) -> f64 {
    if total == 0 {
        0.0
    } else {
        100.0 * correct as f64 / total as f64
    }
}

struct Labeled {
    features: Matrix,
    labels: Vec<u32>,
}

fn load_labeled(manifest: &Manifest, config: &FeatureConfig) -> Result<(Vec<Labeled>, usize)> {
    let items: Vec<(Labeled, usize)> = manifest
        .entries
        .par_iter()
        .map(|e| {
            let labels: FrameLabels = manifest.load_labels(e)?;
            let feats = extract_features(manifest, e, config)?;
            if labels.len() != feats.num_frames() {
                return Err(Error::LabelMismatch {
                    id: e.id.clone(),
                    labels: labels.len(),
                    frames: feats.num_frames(),
                });
            }
            Ok((
                Labeled {
                    features: feats.frames,
                    labels: labels.labels,
                },
                labels.num_classes,
            ))
        })
        .collect::<Result<_>>()?;
    let num_classes = items.iter().map(|(_, k)| *k).max().unwrap_or(0);
    if let Some((_, k)) = items.iter().find(|(_, k)| *k != num_classes) {
        return Err(Error::InvalidInput(format!(
            "label files disagree on the class count ({k} vs {num_classes})"
        )));
    }
    Ok((items.into_iter().map(|(l, _)| l).collect(), num_classes))
}

fn head_step(head: &Linear, repr: &Matrix, labels: &[u32]) -> Result<(f64, LinearGrads, Matrix)> {
    let logits = head.forward(repr)?;
    let (loss, grad_logits) = cross_entropy_from_log_probs(&log_softmax_rows(&logits), labels)?;
    let (grads, grad_repr) = head.backward(repr, &grad_logits)?;
    Ok((loss, grads, grad_repr))
}

/// Trains a probe head (and the backbone when unfrozen) on a labeled manifest.
pub fn finetune(
    backbone: Backbone,
    manifest: &Manifest,
    features: &FeatureConfig,
    config: &FinetuneConfig,
) -> Result<FinetuneOutcome> {
    if config.batch_size == 0 || !(config.learning_rate > 0.0) {
        return Err(Error::Config(format!("invalid fine-tuning config {config:?}")));
    }
    if manifest.is_empty() {
        return Err(Error::InvalidInput("fine-tuning manifest is empty".into()));
    }
    let (data, num_classes) = load_labeled(manifest, features)?;
    if num_classes < 2 {
        return Err(Error::InvalidInput("a probe needs at least two classes".into()));
    }
    let frozen = config.backbone_frozen || matches!(backbone, Backbone::Identity { .. });
    let mut head = Linear::new(
        backbone.output_dim(),
        num_classes,
        &mut seed::rng(seed::split(config.seed, 0)),
    );
    let mut backbone = backbone;
    let adam_cfg = AdamConfig {
        lr: config.learning_rate,
        ..Default::default()
    };
    let mut head_adam = AdamState::new(adam_cfg, &head.tensors());
    let mut backbone_adam = match &backbone {
        Backbone::Apc(m) if !frozen => Some(AdamState::new(adam_cfg, &m.tensors())),
        _ => None,
    };
    // Frozen representations never change, so compute them once.
    let cached: Option<Vec<Matrix>> = if frozen {
        Some(
            data.par_iter()
                .map(|d| backbone.represent(&d.features))
                .collect::<Result<_>>()?,
        )
    } else {
        None
    };

    let mut loss_curve = Vec::with_capacity(config.epochs);
    let mut order: Vec<usize> = (0..data.len()).collect();
    for epoch in 1..=config.epochs {
        order.sort_unstable();
        order.shuffle(&mut seed::rng(seed::split(config.seed, 1000 + epoch as u64)));
        let mut sum = 0.0;
        for batch in order.chunks(config.batch_size) {
            let scale = 1.0 / batch.len() as f64;
            let per_utt: Vec<(f64, LinearGrads, Option<ApcGrads>)> = batch
                .par_iter()
                .map(|&i| {
                    let d = &data[i];
                    match (&cached, &backbone) {
                        (Some(reps), _) => {
                            let (l, g, _) = head_step(&head, &reps[i], &d.labels)?;
                            Ok((l, g, None))
                        }
                        (None, Backbone::Apc(m)) => {
                            let (repr, cache) = m.lstm.forward(&d.features)?;
                            let (l, g, grad_repr) = head_step(&head, &repr, &d.labels)?;
                            let (lstm_grads, _) = m.lstm.backward(&cache, &grad_repr)?;
                            let mut bg = ApcGrads::zeros_like(m);
                            bg.lstm = lstm_grads;
                            Ok((l, g, Some(bg)))
                        }
                        (None, Backbone::Identity { .. }) => unreachable!("identity is always frozen"),
                    }
                })
                .collect::<Result<_>>()?;
            let mut head_grads = LinearGrads::zeros_like(&head);
            let mut bb_grads: Option<ApcGrads> = None;
            for (l, g, bg) in per_utt {
                sum += l;
                head_grads.accumulate(&g)?;
                if let Some(bg) = bg {
                    match bb_grads.as_mut() {
                        Some(acc) => acc.accumulate(&bg)?,
                        None => bb_grads = Some(bg),
                    }
                }
            }
            for m in head_grads.tensors_mut() {
                m.scale_in_place(scale);
            }
            if let Some(max) = config.clip_grad_norm {
                clip_global_norm(&mut head_grads.tensors_mut(), max);
            }
            adam_step(&mut head.tensors_mut(), &head_grads.tensors(), &mut head_adam)?;
            if let (Some(mut bg), Some(state), Backbone::Apc(m)) =
                (bb_grads, backbone_adam.as_mut(), &mut backbone)
            {
                bg.scale(scale);
                if let Some(max) = config.clip_grad_norm {
                    clip_global_norm(&mut bg.tensors_mut(), max);
                }
                adam_step(&mut m.tensors_mut(), &bg.tensors(), state)?;
            }
        }
        let mean = sum / data.len() as f64;
        debug!("probe epoch {epoch}: mean loss {mean:.6}");
        loss_curve.push(mean);
    }
    Ok(FinetuneOutcome {
        probe: ProbeModel {
            backbone,
            head,
            backbone_frozen: frozen,
            features: *features,
        },
        loss_curve,
    })
}

/// Most likely class per frame.
pub fn predict(probe: &ProbeModel, features: &Matrix) -> Result<Vec<usize>> {
    let repr = probe.backbone.represent(features)?;
    Ok(log_softmax_rows(&probe.head.forward(&repr)?).argmax_rows())
}

/// Frame accuracy and confusion counts over a labeled manifest.
pub fn evaluate(probe: &ProbeModel, manifest: &Manifest) -> Result<EvalReport> {
    let k = probe.head.out_dim();
    let (data, num_classes) = load_labeled(manifest, &probe.features)?;
    if !data.is_empty() && num_classes != k {
        return Err(Error::InvalidInput(format!(
            "test labels have {num_classes} classes, probe predicts {k}"
        )));
    }
    let confusions: Vec<Vec<Vec<u64>>> = data
        .par_iter()
        .map(|d| {
            let pred = predict(probe, &d.features)?;
            let mut c = vec![vec![0u64; k]; k];
            for (&t, &p) in d.labels.iter().zip(&pred) {
                c[t as usize][p] += 1;
            }
            Ok(c)
        })
        .collect::<Result<_>>()?;
    let mut total = vec![vec![0u64; k]; k];
    for c in confusions {
        for (row, crow) in total.iter_mut().zip(c) {
            for (a, b) in row.iter_mut().zip(crow) {
                *a += b;
            }
        }
    }
    Ok(EvalReport::from_confusion(total))
}

/// Configuration echo stored with probe checkpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeMeta {
    pub kind: String,
    /// `"apc"` or `"identity"`.
    pub backbone: String,
    pub backbone_frozen: bool,
    pub repr_dim: usize,
    pub num_classes: usize,
    pub features: FeatureConfig,
    pub finetune: FinetuneConfig,
    /// Echo of the pre-training checkpoint, when the backbone is APC.
    pub apc: Option<ApcMeta>,
}

impl ProbeModel {
    pub fn to_checkpoint(&self, finetune: &FinetuneConfig, apc: Option<ApcMeta>) -> Result<Checkpoint> {
        let mut tensors: Vec<(String, Matrix)> = Vec::new();
        let backbone = match &self.backbone {
            Backbone::Apc(m) => {
                for (n, t) in m.named_tensors() {
                    tensors.push((format!("backbone.{n}"), t.clone()));
                }
                "apc"
            }
            Backbone::Identity { .. } => "identity",
        };
        tensors.push(("head.weight".into(), self.head.weight.clone()));
        tensors.push(("head.bias".into(), self.head.bias.clone()));
        let meta = ProbeMeta {
            kind: "probe".into(),
            backbone: backbone.into(),
            backbone_frozen: self.backbone_frozen,
            repr_dim: self.backbone.output_dim(),
            num_classes: self.head.out_dim(),
            features: self.features,
            finetune: *finetune,
            apc,
        };
        Ok(Checkpoint {
            tensors,
            config_json: serde_json::to_string(&meta)?,
        })
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<(Self, ProbeMeta)> {
        let meta: ProbeMeta = serde_json::from_str(&ck.config_json)?;
        if meta.kind != "probe" {
            return Err(Error::Format(format!(
                "expected a probe checkpoint, found {}",
                meta.kind
            )));
        }
        let backbone = match meta.backbone.as_str() {
            "apc" => {
                let layers = meta
                    .apc
                    .as_ref()
                    .map(|a| a.num_layers)
                    .ok_or_else(|| Error::Format("apc probe without backbone metadata".into()))?;
                Backbone::Apc(ApcModel::from_checkpoint_prefixed(ck, "backbone.", layers)?)
            }
            "identity" => Backbone::Identity { dim: meta.repr_dim },
            other => return Err(Error::Format(format!("unknown backbone {other}"))),
        };
        let head = Linear::from_parts(ck.get("head.weight")?.clone(), ck.get("head.bias")?.clone())?;
        if head.in_dim() != backbone.output_dim() {
            return Err(Error::Format("probe head does not match its backbone".into()));
        }
        Ok((
            Self {
                backbone,
                head,
                backbone_frozen: meta.backbone_frozen,
                features: meta.features,
            },
            meta,
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn forced_probe(k: usize, class: usize) -> ProbeModel {
        let mut bias = Matrix::zeros(1, k);
        bias[(0, class)] = 50.0;
        ProbeModel {
            backbone: Backbone::Identity { dim: 4 },
            head: Linear::from_parts(Matrix::zeros(k, 4), bias).unwrap(),
            backbone_frozen: true,
            features: FeatureConfig::default(),
        }
    }

    #[test]
    fn forced_bias_wins_everywhere() {
        let p = forced_probe(5, 3);
        let x = Matrix::from_vec(6, 4, (0..24).map(|i| i as f64).collect()).unwrap();
        let pred = predict(&p, &x).unwrap();
        assert_eq!(pred, vec![3; 6]);
    }

    #[test]
    fn logit_shift_does_not_change_argmax() {
        let mut p = forced_probe(4, 0);
        p.head.weight = Matrix::from_vec(4, 4, (0..16).map(|i| (i as f64 * 0.7).sin()).collect()).unwrap();
        let x = Matrix::from_vec(5, 4, (0..20).map(|i| (i as f64 * 1.3).cos()).collect()).unwrap();
        let before = predict(&p, &x).unwrap();
        for v in p.head.bias.data_mut() {
            *v += 17.0;
        }
        assert_eq!(predict(&p, &x).unwrap(), before);
    }

    #[test]
    fn confusion_accuracy_consistency() {
        let r = EvalReport::from_confusion(vec![vec![3, 1], vec![2, 4]]);
        assert_eq!(r.total_frames, 10);
        assert_eq!(r.correct_frames, 7);
        assert_eq!(r.frame_accuracy_percent, 70.0);
        assert_eq!(r.per_class_accuracy, vec![Some(75.0), Some(100.0 * 4.0 / 6.0)]);
    }

    #[test]
    fn constant_predictor_on_balanced_binary() {
        // all frames predicted 0, half labelled 0
        let r = EvalReport::from_confusion(vec![vec![50, 0], vec![50, 0]]);
        assert_eq!(r.frame_accuracy_percent, 50.0);
    }
}
