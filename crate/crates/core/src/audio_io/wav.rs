use std::path::Path;

use super::AudioBuffer;
use crate::error::{Error, Result};

const PCM16_SCALE: f64 = 32768.0;

/// Reads a mono 16-bit PCM or 32-bit float WAV file.
///
/// Multichannel files are rejected rather than downmixed.
pub fn read_wav(path: impl AsRef<Path>) -> Result<AudioBuffer> {
    let path = path.as_ref();
    let reader = hound::WavReader::open(path).map_err(|e| match e {
        hound::Error::IoError(io) => Error::io(path, io),
        other => Error::Wav(format!("{}: {other}", path.display())),
    })?;
    let spec = reader.spec();
    if spec.channels != 1 {
        return Err(Error::UnsupportedChannels(spec.channels));
    }
    let samples: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (hound::SampleFormat::Int, 16) => reader
            .into_samples::<i16>()
            .map(|s| s.map(|v| f64::from(v) / PCM16_SCALE))
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Wav(format!("{}: {e}", path.display())))?,
        (hound::SampleFormat::Float, 32) => reader
            .into_samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Wav(format!("{}: {e}", path.display())))?,
        (fmt, bits) => {
            return Err(Error::UnsupportedEncoding(format!(
                "{fmt:?} {bits}-bit in {}",
                path.display()
            )))
        }
    };
    AudioBuffer::clipped(samples, spec.sample_rate)
}

/// Quantizes one sample to 16-bit PCM, saturating at full scale.
pub(crate) fn quantize(sample: f64) -> i16 {
    (sample * PCM16_SCALE).round().clamp(-32768.0, 32767.0) as i16
}

/// Writes a mono 16-bit PCM WAV file.
pub fn write_wav(buffer: &AudioBuffer, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: buffer.sample_rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let wrap = |e: hound::Error| match e {
        hound::Error::IoError(io) => Error::io(path, io),
        other => Error::Wav(format!("{}: {other}", path.display())),
    };
    let mut writer = hound::WavWriter::create(path, spec).map_err(wrap)?;
    {
        let mut w = writer.get_i16_writer(buffer.samples.len() as u32);
        for &s in &buffer.samples {
            w.write_sample(quantize(s));
        }
        w.flush().map_err(wrap)?;
    }
    writer.finalize().map_err(wrap)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tmp() -> tempfile::TempDir {
        tempfile::tempdir().unwrap()
    }

    #[test]
    fn one_second_16k_has_16000_samples() {
        let dir = tmp();
        let p = dir.path().join("a.wav");
        write_wav(&AudioBuffer::silence(16_000, 16_000), &p).unwrap();
        let b = read_wav(&p).unwrap();
        assert_eq!(b.len(), 16_000);
        assert_eq!(b.sample_rate, 16_000);
        assert!(b.samples.iter().all(|&s| s == 0.0));
    }

    #[test]
    fn stereo_is_rejected() {
        let dir = tmp();
        let p = dir.path().join("s.wav");
        let spec = hound::WavSpec {
            channels: 2,
            sample_rate: 16_000,
            bits_per_sample: 16,
            sample_format: hound::SampleFormat::Int,
        };
        let mut w = hound::WavWriter::create(&p, spec).unwrap();
        for _ in 0..100 {
            w.write_sample(0i16).unwrap();
        }
        w.finalize().unwrap();
        let err = read_wav(&p).unwrap_err();
        assert!(err.to_string().contains("unsupported channel count"), "{err}");
    }

    #[test]
    fn float_wav_is_accepted() {
        let dir = tmp();
        let p = dir.path().join("f.wav");
        let spec = hound::WavSpec {
            channels: 1,
            sample_rate: 16_000,
            bits_per_sample: 32,
            sample_format: hound::SampleFormat::Float,
        };
        let mut w = hound::WavWriter::create(&p, spec).unwrap();
        for v in [0.5f32, -0.25, 0.0] {
            w.write_sample(v).unwrap();
        }
        w.finalize().unwrap();
        assert_eq!(read_wav(&p).unwrap().samples, vec![0.5, -0.25, 0.0]);
    }

    #[test]
    fn unsupported_bit_depth() {
        let dir = tmp();
        let p = dir.path().join("u.wav");
        let spec = hound::WavSpec {
            channels: 1,
            sample_rate: 16_000,
            bits_per_sample: 8,
            sample_format: hound::SampleFormat::Int,
        };
        let mut w = hound::WavWriter::create(&p, spec).unwrap();
        w.write_sample(0i8).unwrap();
        w.finalize().unwrap();
        assert!(matches!(read_wav(&p), Err(Error::UnsupportedEncoding(_))));
    }

    #[test]
    fn malformed_header() {
        let dir = tmp();
        let p = dir.path().join("bad.wav");
        std::fs::write(&p, b"RIFFxxxxWAVEjunk").unwrap();
        assert!(read_wav(&p).is_err());
    }

    #[test]
    fn sine_round_trip_within_quantization() {
        let dir = tmp();
        let p = dir.path().join("sine.wav");
        let samples: Vec<f64> = (0..16_000)
            .map(|i| (2.0 * std::f64::consts::PI * 440.0 * i as f64 / 16_000.0).sin())
            .collect();
        let b = AudioBuffer::new(samples, 16_000).unwrap();
        write_wav(&b, &p).unwrap();
        let r = read_wav(&p).unwrap();
        assert_eq!(r.len(), b.len());
        let max = b
            .samples
            .iter()
            .zip(&r.samples)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(max <= 1.0 / 32768.0, "{max}");
    }

    #[test]
    fn write_saturates() {
        assert_eq!(quantize(1.0), 32767);
        assert_eq!(quantize(-1.0), -32768);
        assert_eq!(quantize(3.0), 32767);
    }
}
