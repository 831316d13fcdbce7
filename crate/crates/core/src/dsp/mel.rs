use serde::{Deserialize, Serialize};

use super::{stft_magnitude, FeatureSequence, StftConfig};
use crate::audio_io::AudioBuffer;
use crate::error::{Error, Result};
use crate::nn::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MelConfig {
    pub num_mels: usize,
    pub f_min: f64,
    /// Upper edge; `None` means the Nyquist frequency.
    pub f_max: Option<f64>,
    pub log_floor: f64,
}

impl Default for MelConfig {
    fn default() -> Self {
        Self {
            num_mels: 80,
            f_min: 0.0,
            f_max: None,
            log_floor: 1e-10,
        }
    }
}

pub fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

pub fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// Triangular filters over the FFT bins.
#[derive(Debug, Clone)]
pub struct MelFilterbank {
    /// num_mels × (fft_size/2+1)
    pub weights: Matrix,
    /// Peak frequency of each filter.
    pub center_hz: Vec<f64>,
}

pub fn mel_filterbank(mel: &MelConfig, stft: &StftConfig, sample_rate: u32) -> Result<MelFilterbank> {
    stft.validate()?;
    let nyquist = f64::from(sample_rate) / 2.0;
    let f_max = mel.f_max.unwrap_or(nyquist);
    if mel.num_mels == 0 || !(mel.f_min >= 0.0 && mel.f_min < f_max && f_max <= nyquist) {
        return Err(Error::Config(format!(
            "need num_mels ≥ 1 and 0 ≤ f_min < f_max ≤ {nyquist}, got {mel:?}"
        )));
    }
    if !(mel.log_floor > 0.0) {
        return Err(Error::Config("log_floor must be positive".into()));
    }
    let (lo, hi) = (hz_to_mel(mel.f_min), hz_to_mel(f_max));
    let edges: Vec<f64> = (0..mel.num_mels + 2)
        .map(|i| mel_to_hz(lo + (hi - lo) * i as f64 / (mel.num_mels + 1) as f64))
        .collect();
    let bins = stft.num_bins();
    let bin_hz = f64::from(sample_rate) / stft.fft_size as f64;
    let mut weights = Matrix::zeros(mel.num_mels, bins);
    for m in 0..mel.num_mels {
        let (left, centre, right) = (edges[m], edges[m + 1], edges[m + 2]);
        let row = weights.row_mut(m);
        for (k, w) in row.iter_mut().enumerate() {
            let f = k as f64 * bin_hz;
            let up = (f - left) / (centre - left);
            let down = (right - f) / (right - centre);
            *w = up.min(down).max(0.0);
        }
        if row.iter().all(|&w| w <= 0.0) {
            return Err(Error::Config(format!(
                "mel filter {m} covers no FFT bin; use fewer mels or a larger FFT"
            )));
        }
    }
    Ok(MelFilterbank {
        weights,
        center_hz: edges[1..=mel.num_mels].to_vec(),
    })
}

/// Mel-pooled power spectrogram (before the log), T×num_mels.
pub fn mel_power(buffer: &AudioBuffer, stft: &StftConfig, mel: &MelConfig) -> Result<Matrix> {
    let fb = mel_filterbank(mel, stft, buffer.sample_rate)?;
    let power = stft_magnitude(buffer, stft)?.map(|m| m * m);
    power.matmul_t(&fb.weights)
}

/// `ln(filterbank · |X|² + floor)` per frame.
pub fn log_mel(buffer: &AudioBuffer, stft: &StftConfig, mel: &MelConfig) -> Result<FeatureSequence> {
    let floor = mel.log_floor;
    let frames = mel_power(buffer, stft, mel)?.map(|p| (p + floor).ln());
    Ok(FeatureSequence {
        frames,
        frame_rate: f64::from(buffer.sample_rate) / stft.hop_length as f64,
    })
}
