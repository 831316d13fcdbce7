//! Feature frontend: STFT magnitudes, mel filterbank and log-mel features.

pub mod features;
mod mel;
mod stft;

pub use features::{
    extract_features, load_features, save_features, FeatureConfig, FeatureNorm, FeatureSequence,
};
pub use mel::{hz_to_mel, log_mel, mel_filterbank, mel_power, mel_to_hz, MelConfig, MelFilterbank};
pub use stft::{hann_window, real_fft, stft_magnitude, StftConfig};
