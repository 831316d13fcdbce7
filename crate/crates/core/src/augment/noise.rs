use crate::audio_io::AudioBuffer;
use crate::error::{Error, Result};

/// Result of an additive-noise mix.
#[derive(Debug, Clone)]
pub struct NoiseMix {
    pub audio: AudioBuffer,
    /// Factor applied to the tiled noise.
    pub gain: f64,
    /// Samples that saturated at ±1.
    pub clipped_samples: usize,
}

/// Adds `noise` to `clean` at `snr_db`, tiling the noise from sample 0.
pub fn mix_noise(clean: &AudioBuffer, noise: &AudioBuffer, snr_db: f64) -> Result<AudioBuffer> {
    Ok(mix_noise_at(clean, noise, snr_db, 0)?.audio)
}

/// Adds `noise` to `clean` at `snr_db`, reading the noise cyclically from
/// `offset`.
///
/// Powers are full-utterance mean squares, and the gain is computed from
/// the noise segment actually used, so before clipping
/// `10·log10(P_clean / P_added) == snr_db` up to rounding.
pub fn mix_noise_at(
    clean: &AudioBuffer,
    noise: &AudioBuffer,
    snr_db: f64,
    offset: usize,
) -> Result<NoiseMix> {
    if clean.sample_rate != noise.sample_rate {
        return Err(Error::SampleRateMismatch {
            expected: clean.sample_rate,
            actual: noise.sample_rate,
        });
    }
    if !snr_db.is_finite() {
        return Err(Error::InvalidInput(format!("SNR {snr_db} dB is not finite")));
    }
    let p_clean = clean.power();
    if !(p_clean > 0.0) {
        return Err(Error::InvalidInput(
            "clean signal is silent; SNR undefined".into(),
        ));
    }
    if noise.is_empty() || !(noise.power() > 0.0) {
        return Err(Error::InvalidInput("noise signal is silent".into()));
    }
    let n = noise.len();
    let tiled: Vec<f64> = (0..clean.len())
        .map(|i| noise.samples[(offset + i) % n])
        .collect();
    let p_noise = tiled.iter().map(|s| s * s).sum::<f64>() / tiled.len() as f64;
    if !(p_noise > 0.0) {
        return Err(Error::InvalidInput(
            "noise segment used for mixing is silent".into(),
        ));
    }
    let gain = (p_clean / (p_noise * 10f64.powf(snr_db / 10.0))).sqrt();
    let mut clipped_samples = 0;
    let samples = clean
        .samples
        .iter()
        .zip(&tiled)
        .map(|(c, v)| {
            let y = c + gain * v;
            if y.abs() > 1.0 {
                clipped_samples += 1;
            }
            y.clamp(-1.0, 1.0)
        })
        .collect();
    Ok(NoiseMix {
        audio: AudioBuffer::new(samples, clean.sample_rate)?,
        gain,
        clipped_samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tone(len: usize, freq: f64, amp: f64) -> AudioBuffer {
        let s = (0..len)
            .map(|i| amp * (2.0 * std::f64::consts::PI * freq * i as f64 / 16_000.0).sin())
            .collect();
        AudioBuffer::new(s, 16_000).unwrap()
    }

    #[test]
    fn zero_db_gives_equal_rms() {
        let clean = tone(16_000, 300.0, 0.1 * 2f64.sqrt());
        let noise = tone(5_000, 1234.0, 0.4);
        let out = mix_noise(&clean, &noise, 0.0).unwrap();
        let resid = AudioBuffer::new(
            out.samples
                .iter()
                .zip(&clean.samples)
                .map(|(o, c)| o - c)
                .collect(),
            16_000,
        )
        .unwrap();
        assert!((clean.rms() - 0.1).abs() < 1e-6);
        assert!((resid.rms() - 0.1).abs() < 1e-6);
    }

    #[test]
    fn error_cases() {
        let clean = tone(1000, 300.0, 0.1);
        let noise = tone(1000, 500.0, 0.1);
        assert!(mix_noise(&AudioBuffer::silence(1000, 16_000), &noise, 5.0).is_err());
        assert!(mix_noise(&clean, &AudioBuffer::silence(1000, 16_000), 5.0).is_err());
        let other_rate = AudioBuffer::new(noise.samples.clone(), 8000).unwrap();
        assert!(matches!(
            mix_noise(&clean, &other_rate, 5.0),
            Err(Error::SampleRateMismatch { .. })
        ));
    }

    #[test]
    fn output_saturates() {
        let clean = tone(1000, 300.0, 0.9);
        let noise = tone(1000, 500.0, 0.9);
        let m = mix_noise_at(&clean, &noise, -10.0, 0).unwrap();
        assert!(m.clipped_samples > 0);
        assert!(m.audio.samples.iter().all(|s| s.abs() <= 1.0));
    }
}
