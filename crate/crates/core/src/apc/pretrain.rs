use std::fs;
use std::path::Path;

use log::warn;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{ApcGrads, ApcModel};
use crate::audio_io::Manifest;
use crate::dsp::{extract_features, FeatureConfig};
use crate::error::{Error, Result};
use crate::nn::{adam_step, clip_global_norm, AdamConfig, AdamState, Matrix};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PretrainConfig {
    /// Frames ahead to predict.
    pub time_shift: usize,
    pub epochs: usize,
    /// Utterances per Adam step.
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub max_frames_per_utterance: usize,
    pub hidden_dim: usize,
    pub num_layers: usize,
    pub clip_grad_norm: Option<f64>,
    pub checkpoint_every: Option<usize>,
    pub features: FeatureConfig,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        Self {
            time_shift: 3,
            epochs: 100,
            batch_size: 32,
            learning_rate: 1e-4,
            seed: 0,
            max_frames_per_utterance: 2000,
            hidden_dim: 512,
            num_layers: 3,
            clip_grad_norm: None,
            checkpoint_every: None,
            features: FeatureConfig::default(),
        }
    }
}

impl PretrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.time_shift == 0
            || self.batch_size == 0
            || self.hidden_dim == 0
            || self.num_layers == 0
            || self.max_frames_per_utterance <= self.time_shift
        {
            return Err(Error::Config(format!("invalid pre-training config {self:?}")));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("learning rate must be positive".into()));
        }
        self.features.stft.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub epoch: usize,
    pub mean_loss: f64,
}

#[derive(Debug, Clone)]
pub struct PretrainOutcome {
    pub model: ApcModel,
    pub loss_curve: Vec<EpochLoss>,
    /// Ids of utterances too short for the prediction target.
    pub skipped: Vec<String>,
    pub pretrain_hours: f64,
}

impl PretrainOutcome {
    pub fn final_loss(&self) -> Option<f64> {
        self.loss_curve.last().map(|e| e.mean_loss)
    }
}

/// Features for every entry, in manifest order, extracted in parallel.
pub fn load_manifest_features(manifest: &Manifest, config: &FeatureConfig) -> Result<Vec<Matrix>> {
    manifest
        .entries
        .par_iter()
        .map(|e| extract_features(manifest, e, config).map(|f| f.frames))
        .collect()
}

/// Utterances per parallel gradient chunk. Fixed so the summation order, and
/// hence every bit of the update, is independent of the thread count.
const GRAD_CHUNK: usize = 4;

fn batch_gradient(model: &ApcModel, batch: &[&Matrix], time_shift: usize) -> Result<(Vec<f64>, ApcGrads)> {
    let partials: Vec<(Vec<f64>, ApcGrads)> = batch
        .par_chunks(GRAD_CHUNK)
        .map(|chunk| {
            let mut losses = Vec::with_capacity(chunk.len());
            let mut acc = ApcGrads::zeros_like(model);
            for feats in chunk {
                let (l, g) = model.loss(feats, time_shift)?;
                losses.push(l);
                acc.accumulate(&g)?;
            }
            Ok((losses, acc))
        })
        .collect::<Result<_>>()?;
    let mut losses = Vec::with_capacity(batch.len());
    let mut total = ApcGrads::zeros_like(model);
    for (l, g) in partials {
        losses.extend(l);
        total.accumulate(&g)?;
    }
    total.scale(1.0 / batch.len() as f64);
    Ok((losses, total))
}

/// Pre-trains a fresh model on `manifest`. Never reads label files.
pub fn pretrain(config: &PretrainConfig, manifest: &Manifest) -> Result<PretrainOutcome> {
    pretrain_with_callback(config, manifest, |_, _, _| Ok(()))
}

/// Like [`pretrain`], calling `on_epoch(epoch, model, mean_loss)` after every epoch.
pub fn pretrain_with_callback(
    config: &PretrainConfig,
    manifest: &Manifest,
    mut on_epoch: impl FnMut(usize, &ApcModel, f64) -> Result<()>,
) -> Result<PretrainOutcome> {
    config.validate()?;
    if manifest.is_empty() {
        return Err(Error::InvalidInput("pre-training manifest is empty".into()));
    }
    let all = load_manifest_features(manifest, &config.features)?;
    let mut data = Vec::with_capacity(all.len());
    let mut skipped = Vec::new();
    for (entry, mut feats) in manifest.entries.iter().zip(all) {
        if feats.rows() > config.max_frames_per_utterance {
            feats = feats.slice_rows(0, config.max_frames_per_utterance);
        }
        if feats.rows() <= config.time_shift {
            warn!(
                "skipping {}: {} frames, need more than {}",
                entry.id,
                feats.rows(),
                config.time_shift
            );
            skipped.push(entry.id.clone());
        } else {
            data.push(feats);
        }
    }
    if data.is_empty() {
        return Err(Error::InvalidInput(
            "no utterance is long enough to pre-train on".into(),
        ));
    }
    let dim = data[0].cols();
    let mut model = ApcModel::new(
        dim,
        config.hidden_dim,
        config.num_layers,
        seed::split(config.seed, 0),
    );
    let mut adam = AdamState::new(
        AdamConfig {
            lr: config.learning_rate,
            ..Default::default()
        },
        &model.tensors(),
    );
    let mut loss_curve = Vec::with_capacity(config.epochs);
    let mut order: Vec<usize> = (0..data.len()).collect();
    for epoch in 1..=config.epochs {
        order.sort_unstable();
        order.shuffle(&mut seed::rng(seed::split(config.seed, 1000 + epoch as u64)));
        let mut sum = 0.0;
        for batch_idx in order.chunks(config.batch_size) {
            let batch: Vec<&Matrix> = batch_idx.iter().map(|&i| &data[i]).collect();
            let (losses, mut grads) = batch_gradient(&model, &batch, config.time_shift)?;
            sum += losses.iter().sum::<f64>();
            if let Some(max) = config.clip_grad_norm {
                clip_global_norm(&mut grads.tensors_mut(), max);
            }
            adam_step(&mut model.tensors_mut(), &grads.tensors(), &mut adam)?;
        }
        let mean_loss = sum / data.len() as f64;
        log::debug!("epoch {epoch}: mean loss {mean_loss:.6}");
        loss_curve.push(EpochLoss { epoch, mean_loss });
        on_epoch(epoch, &model, mean_loss)?;
    }
    Ok(PretrainOutcome {
        model,
        loss_curve,
        skipped,
        pretrain_hours: manifest.total_hours(),
    })
}

/// Writes `epoch,mean_loss` rows.
pub fn write_loss_curve(curve: &[EpochLoss], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut s = String::from("epoch,mean_loss\n");
    for e in curve {
        s.push_str(&format!("{},{}\n", e.epoch, e.mean_loss));
    }
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, s).map_err(|e| Error::io(path, e))
}
