//! Feature sequences, the AFEA file format and manifest-driven extraction.
//!
//! AFEA layout (little-endian): `"AFEA"`, u32 version, u32 T, u32 D,
//! f32 frame rate, then T·D f32 values row-major.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{log_mel, MelConfig, StftConfig};
use crate::audio_io::{read_wav, Manifest, ManifestEntry, CANONICAL_SAMPLE_RATE};
use crate::error::{Error, Result};
use crate::nn::checkpoint::Reader;
use crate::nn::Matrix;

pub const AFEA_MAGIC: &[u8; 4] = b"AFEA";
pub const AFEA_VERSION: u32 = 1;

/// T×D frame matrix plus its frame rate.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSequence {
    pub frames: Matrix,
    pub frame_rate: f64,
}

impl FeatureSequence {
    pub fn num_frames(&self) -> usize {
        self.frames.rows()
    }

    pub fn dim(&self) -> usize {
        self.frames.cols()
    }

    /// Zero mean, unit variance per dimension over this utterance.
    pub fn standardize(&mut self) {
        self.normalize_columns(true);
    }

    /// Zero mean per dimension over this utterance.
    pub fn mean_normalize(&mut self) {
        self.normalize_columns(false);
    }

    fn normalize_columns(&mut self, scale: bool) {
        let (t, d) = self.frames.shape();
        if t == 0 {
            return;
        }
        for c in 0..d {
            let mean = (0..t).map(|r| self.frames[(r, c)]).sum::<f64>() / t as f64;
            let var = (0..t).map(|r| (self.frames[(r, c)] - mean).powi(2)).sum::<f64>() / t as f64;
            let inv = if scale && var > 1e-12 {
                1.0 / var.sqrt()
            } else {
                1.0
            };
            for r in 0..t {
                self.frames[(r, c)] = (self.frames[(r, c)] - mean) * inv;
            }
        }
    }

    /// Keeps at most the first `max_frames` frames.
    pub fn truncate(&mut self, max_frames: usize) {
        if self.num_frames() > max_frames {
            self.frames = self.frames.slice_rows(0, max_frames);
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let (t, d) = self.frames.shape();
        let mut out = Vec::with_capacity(20 + 4 * t * d);
        out.extend_from_slice(AFEA_MAGIC);
        out.extend_from_slice(&AFEA_VERSION.to_le_bytes());
        out.extend_from_slice(&(t as u32).to_le_bytes());
        out.extend_from_slice(&(d as u32).to_le_bytes());
        out.extend_from_slice(&(self.frame_rate as f32).to_le_bytes());
        for &v in self.frames.data() {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != AFEA_MAGIC {
            return Err(Error::Format("not an AFEA feature file".into()));
        }
        let version = r.u32()?;
        if version != AFEA_VERSION {
            return Err(Error::Format(format!("unsupported AFEA version {version}")));
        }
        let t = r.u32()? as usize;
        let d = r.u32()? as usize;
        let frame_rate = f64::from(r.f32()?);
        let n = t
            .checked_mul(d)
            .and_then(|n| n.checked_mul(4))
            .ok_or_else(|| Error::Format("feature matrix too large".into()))?;
        let data = r
            .take(n)?
            .chunks_exact(4)
            .map(|c| f64::from(f32::from_le_bytes([c[0], c[1], c[2], c[3]])))
            .collect();
        if r.pos != bytes.len() {
            return Err(Error::Format("trailing bytes after feature matrix".into()));
        }
        Ok(Self {
            frames: Matrix::from_vec(t, d, data)?,
            frame_rate,
        })
    }
}

pub fn save_features(features: &FeatureSequence, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, features.to_bytes()).map_err(|e| Error::io(path, e))
}

pub fn load_features(path: impl AsRef<Path>) -> Result<FeatureSequence> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    FeatureSequence::from_bytes(&bytes)
}

/// Per-utterance normalization applied after feature extraction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureNorm {
    None,
    /// Subtract the per-dimension mean.
    #[default]
    Mean,
    /// Subtract the mean and divide by the standard deviation.
    MeanVariance,
}

/// Everything needed to turn an utterance into model input.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct FeatureConfig {
    pub stft: StftConfig,
    pub mel: MelConfig,
    pub normalize: FeatureNorm,
}

/// Features for one manifest entry.
///
/// Entries whose audio path ends in `.afea` are loaded as precomputed
/// features; anything else is read as a 16 kHz WAV.
pub fn extract_features(
    manifest: &Manifest,
    entry: &ManifestEntry,
    config: &FeatureConfig,
) -> Result<FeatureSequence> {
    let path = manifest.audio_path(entry);
    let mut feats = if path.extension().is_some_and(|e| e == "afea") {
        load_features(&path)?
    } else {
        let audio = read_wav(&path)?;
        if audio.sample_rate != CANONICAL_SAMPLE_RATE {
            return Err(Error::SampleRateMismatch {
                expected: CANONICAL_SAMPLE_RATE,
                actual: audio.sample_rate,
            });
        }
        log_mel(&audio, &config.stft, &config.mel)?
    };
    match config.normalize {
        FeatureNorm::None => {}
        FeatureNorm::Mean => feats.mean_normalize(),
        FeatureNorm::MeanVariance => feats.standardize(),
    }
    Ok(feats)
}
