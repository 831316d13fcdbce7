//! Duration-preserving pitch shift: phase-vocoder time stretch followed by
//! linear-interpolation resampling.

use std::f64::consts::PI;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::audio_io::AudioBuffer;
use crate::dsp::hann_window;
use crate::error::{Error, Result};

pub const PV_FFT_SIZE: usize = 1024;
pub const PV_ANALYSIS_HOP: usize = 128;
const MAX_SEMITONES: f64 = 12.0;

fn wrap_phase(x: f64) -> f64 {
    let y = (x + PI).rem_euclid(2.0 * PI) - PI;
    if y == -PI {
        PI
    } else {
        y
    }
}

/// Phase-vocoder time stretch with analysis hop `ha` and synthesis hop `hs`.
///
/// The output is `len·hs/ha` samples long (rounded) and keeps the input's
/// frequencies: per-bin instantaneous frequencies are estimated from the
/// analysis phase advance and integrated over the synthesis hop.
pub fn time_stretch(x: &[f64], ha: usize, hs: usize, fft_size: usize) -> Vec<f64> {
    let n = fft_size;
    let window = hann_window(n);
    let mut padded = vec![0.0; n];
    padded.extend_from_slice(x);
    padded.extend(std::iter::repeat_n(0.0, n));
    let frames = (padded.len() - n) / ha + 1;
    let out_len = (frames - 1) * hs + n;
    let mut out = vec![0.0; out_len];
    let mut norm = vec![0.0; out_len];

    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let bins = n / 2 + 1;
    let mut prev_phase = vec![0.0; bins];
    let mut synth_phase = vec![0.0; bins];
    let mut buf = vec![Complex::new(0.0, 0.0); n];

    for m in 0..frames {
        let start = m * ha;
        for (k, b) in buf.iter_mut().enumerate() {
            *b = Complex::new(padded[start + k] * window[k], 0.0);
        }
        fwd.process(&mut buf);
        for k in 0..bins {
            let phase = buf[k].arg();
            if m == 0 {
                synth_phase[k] = phase;
            } else {
                let omega = 2.0 * PI * k as f64 / n as f64;
                let dev = wrap_phase(phase - prev_phase[k] - omega * ha as f64);
                let inst = omega + dev / ha as f64;
                synth_phase[k] += inst * hs as f64;
            }
            prev_phase[k] = phase;
        }
        for k in 0..bins {
            let c = Complex::from_polar(buf[k].norm(), synth_phase[k]);
            buf[k] = c;
            if k > 0 && k < n - k {
                buf[n - k] = c.conj();
            }
        }
        buf[0].im = 0.0;
        buf[n / 2].im = 0.0;
        inv.process(&mut buf);
        let o = m * hs;
        for k in 0..n {
            out[o + k] += buf[k].re / n as f64 * window[k];
            norm[o + k] += window[k] * window[k];
        }
    }
    for (v, w) in out.iter_mut().zip(&norm) {
        if *w > 1e-6 {
            *v /= w;
        } else {
            *v = 0.0;
        }
    }
    let lead = (n as f64 * hs as f64 / ha as f64).round() as usize;
    let len = (x.len() as f64 * hs as f64 / ha as f64).round() as usize;
    out.into_iter().skip(lead).take(len).collect()
}

/// Shifts pitch by `semitones` (|s| ≤ 12) while keeping the sample count.
///
/// Frequencies scale by exactly `2^(s/12)`: the stretch preserves them and
/// the resampler reads the stretched signal at that rate.
pub fn pitch_shift(buffer: &AudioBuffer, semitones: f64) -> Result<AudioBuffer> {
    if !(semitones.abs() <= MAX_SEMITONES) {
        return Err(Error::InvalidInput(format!(
            "pitch shift of {semitones} semitones is outside ±{MAX_SEMITONES}"
        )));
    }
    if buffer.len() < 4 * PV_FFT_SIZE {
        return Err(Error::InvalidInput(format!(
            "pitch shift needs at least {} samples, got {}",
            4 * PV_FFT_SIZE,
            buffer.len()
        )));
    }
    let rate = 2f64.powf(semitones / 12.0);
    let hs = ((PV_ANALYSIS_HOP as f64 * rate).round() as usize).max(1);
    let stretched = time_stretch(&buffer.samples, PV_ANALYSIS_HOP, hs, PV_FFT_SIZE);
    let samples = (0..buffer.len())
        .map(|i| {
            let pos = i as f64 * rate;
            let j = pos.floor() as usize;
            let frac = pos - j as f64;
            match (stretched.get(j), stretched.get(j + 1)) {
                (Some(a), Some(b)) => a + frac * (b - a),
                (Some(a), None) => *a * (1.0 - frac),
                _ => 0.0,
            }
        })
        .collect();
    AudioBuffer::clipped(samples, buffer.sample_rate)
}
