//! Audio and corpus ingestion: WAV codec, manifests, frame labels and the
//! deterministic synthetic phoneme corpus.

mod buffer;
mod labels;
mod manifest;
pub mod synth;
mod wav;

pub use buffer::AudioBuffer;
pub use labels::FrameLabels;
pub use manifest::{load_manifest, Manifest, ManifestEntry, SourceTag};
pub use synth::{
    class_frequencies, generate_noise_corpus, generate_synth_corpus, NoiseCorpusSpec, SynthCorpusSpec,
};
pub use wav::{read_wav, write_wav};

/// Canonical sample rate of every corpus handled by the toolkit.
pub const CANONICAL_SAMPLE_RATE: u32 = 16_000;
