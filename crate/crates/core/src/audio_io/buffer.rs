use crate::error::{Error, Result};

/// Mono PCM audio with samples in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioBuffer {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

impl AudioBuffer {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::InvalidInput("sample rate must be positive".into()));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::NonFinite(format!("audio sample {i}")));
        }
        Ok(Self { samples, sample_rate })
    }

    /// Builds a buffer, saturating every sample into `[-1, 1]`.
    pub fn clipped(mut samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        for s in samples.iter_mut() {
            *s = s.clamp(-1.0, 1.0);
        }
        Self::new(samples, sample_rate)
    }

    pub fn silence(len: usize, sample_rate: u32) -> Self {
        Self {
            samples: vec![0.0; len],
            sample_rate,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / f64::from(self.sample_rate)
    }

    /// Mean square over the whole buffer.
    pub fn power(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        self.samples.iter().map(|s| s * s).sum::<f64>() / self.samples.len() as f64
    }

    pub fn rms(&self) -> f64 {
        self.power().sqrt()
    }
}
