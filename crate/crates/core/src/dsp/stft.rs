use std::f64::consts::PI;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::audio_io::AudioBuffer;
use crate::error::{Error, Result};
use crate::nn::Matrix;

/// Framing parameters. Defaults are 25 ms / 10 ms at 16 kHz with a 512-point FFT.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct StftConfig {
    pub window_length: usize,
    pub hop_length: usize,
    pub fft_size: usize,
}

impl Default for StftConfig {
    fn default() -> Self {
        Self {
            window_length: 400,
            hop_length: 160,
            fft_size: 512,
        }
    }
}

impl StftConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hop_length == 0
            || self.hop_length > self.window_length
            || self.window_length > self.fft_size
            || !self.fft_size.is_power_of_two()
        {
            return Err(Error::Config(format!(
                "need 0 < hop ≤ window ≤ fft with fft a power of two, got {self:?}"
            )));
        }
        Ok(())
    }

    /// `1 + floor((n - window) / hop)`, or 0 when `n` is shorter than a window.
    pub fn num_frames(&self, num_samples: usize) -> usize {
        if num_samples < self.window_length {
            0
        } else {
            1 + (num_samples - self.window_length) / self.hop_length
        }
    }

    pub fn num_bins(&self) -> usize {
        self.fft_size / 2 + 1
    }
}

/// Periodic Hann window.
pub fn hann_window(len: usize) -> Vec<f64> {
    (0..len)
        .map(|n| 0.5 - 0.5 * (2.0 * PI * n as f64 / len as f64).cos())
        .collect()
}

/// Full complex spectrum of `frame` zero-padded to `fft_size`.
pub fn real_fft(frame: &[f64], fft_size: usize) -> Vec<Complex<f64>> {
    let mut buf: Vec<Complex<f64>> = frame
        .iter()
        .map(|&x| Complex::new(x, 0.0))
        .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
        .take(fft_size)
        .collect();
    FftPlanner::new().plan_fft_forward(fft_size).process(&mut buf);
    buf
}

/// Magnitude spectrogram, T×(fft_size/2+1), Hann-windowed, no padding.
pub fn stft_magnitude(buffer: &AudioBuffer, config: &StftConfig) -> Result<Matrix> {
    config.validate()?;
    let n = buffer.len();
    if n < config.window_length {
        return Err(Error::InvalidInput(format!(
            "buffer of {n} samples is shorter than one window ({})",
            config.window_length
        )));
    }
    let frames = config.num_frames(n);
    let bins = config.num_bins();
    let window = hann_window(config.window_length);
    let fft = FftPlanner::new().plan_fft_forward(config.fft_size);
    let mut scratch = vec![Complex::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    let mut buf = vec![Complex::new(0.0, 0.0); config.fft_size];
    let mut out = Matrix::zeros(frames, bins);
    for t in 0..frames {
        let start = t * config.hop_length;
        let seg = &buffer.samples[start..start + config.window_length];
        for (k, b) in buf.iter_mut().enumerate() {
            *b = if k < config.window_length {
                Complex::new(seg[k] * window[k], 0.0)
            } else {
                Complex::new(0.0, 0.0)
            };
        }
        fft.process_with_scratch(&mut buf, &mut scratch);
        for (o, c) in out.row_mut(t).iter_mut().zip(&buf[..bins]) {
            *o = c.norm();
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frame_counts() {
        let c = StftConfig::default();
        assert_eq!(c.num_frames(400), 1);
        assert_eq!(c.num_frames(560), 2);
        assert_eq!(c.num_frames(399), 0);
        assert_eq!(c.num_frames(16_000), 98);
    }

    #[test]
    fn short_buffer_rejected() {
        let b = AudioBuffer::silence(399, 16_000);
        assert!(stft_magnitude(&b, &StftConfig::default()).is_err());
    }

    #[test]
    fn invalid_configs() {
        let bad = [
            StftConfig {
                window_length: 400,
                hop_length: 0,
                fft_size: 512,
            },
            StftConfig {
                window_length: 400,
                hop_length: 500,
                fft_size: 512,
            },
            StftConfig {
                window_length: 600,
                hop_length: 160,
                fft_size: 512,
            },
            StftConfig {
                window_length: 400,
                hop_length: 160,
                fft_size: 500,
            },
        ];
        for c in bad {
            assert!(c.validate().is_err(), "{c:?}");
        }
    }

    #[test]
    fn sine_peaks_in_bin_14() {
        let sr = 16_000.0;
        let samples = (0..16_000)
            .map(|i| (2.0 * PI * 440.0 * i as f64 / sr).sin())
            .collect();
        let b = AudioBuffer::new(samples, 16_000).unwrap();
        let mag = stft_magnitude(&b, &StftConfig::default()).unwrap();
        assert!(mag.argmax_rows().iter().all(|&k| k == 14));
    }
}
