//! Deterministic synthetic corpora.
//!
//! Each phoneme class is a fixed triple of sinusoids ("formants"). Utterances
//! are concatenations of segments of 100 to 400 ms, one class per segment,
//! with a low white-noise floor. Frame labels follow the default STFT grid.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{write_wav, AudioBuffer, FrameLabels, Manifest, ManifestEntry, SourceTag};
use crate::dsp::StftConfig;
use crate::error::{Error, Result};
use crate::seed;

const F1_GRID: [f64; 5] = [200.0, 350.0, 500.0, 650.0, 800.0];
const F2_GRID: [f64; 9] = [
    950.0, 1100.0, 1250.0, 1400.0, 1550.0, 1700.0, 1850.0, 2000.0, 2150.0,
];
const F3_GRID: [f64; 7] = [2300.0, 2450.0, 2600.0, 2750.0, 2900.0, 3050.0, 3200.0];
const FORMANT_AMPLITUDES: [f64; 3] = [0.2, 0.12, 0.08];
const NOISE_FLOOR: f64 = 0.005;
const MIN_SEGMENT_S: f64 = 0.1;
const MAX_SEGMENT_S: f64 = 0.4;

/// Largest class inventory the frequency grid can keep distinct.
pub const MAX_CLASSES: usize = F1_GRID.len() * F2_GRID.len() * F3_GRID.len();

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthCorpusSpec {
    pub num_utterances: usize,
    pub utterance_duration_s: f64,
    pub num_phoneme_classes: usize,
    pub sample_rate: u32,
    pub seed: u64,
    /// Prefix of every utterance id, so separately generated corpora stay disjoint.
    pub id_prefix: String,
    /// Multiplies every class frequency; values other than 1 give a shifted
    /// "accent" of the same inventory.
    pub formant_scale: f64,
}

impl Default for SynthCorpusSpec {
    fn default() -> Self {
        Self {
            num_utterances: 50,
            utterance_duration_s: 2.0,
            num_phoneme_classes: 5,
            sample_rate: super::CANONICAL_SAMPLE_RATE,
            seed: 0,
            id_prefix: "synth".into(),
            formant_scale: 1.0,
        }
    }
}

impl SynthCorpusSpec {
    pub fn validate(&self) -> Result<()> {
        if self.num_utterances == 0 || self.num_phoneme_classes == 0 || self.sample_rate == 0 {
            return Err(Error::Config("synthetic corpus counts must be positive".into()));
        }
        if self.num_phoneme_classes > MAX_CLASSES {
            return Err(Error::Config(format!(
                "at most {MAX_CLASSES} synthetic classes are supported"
            )));
        }
        if !(self.utterance_duration_s > 0.0 && self.utterance_duration_s.is_finite()) {
            return Err(Error::Config("utterance duration must be positive".into()));
        }
        if !(self.formant_scale > 0.0) {
            return Err(Error::Config("formant_scale must be positive".into()));
        }
        let stft = StftConfig::default();
        if self.num_samples() < stft.window_length {
            return Err(Error::Config(
                "utterances must be at least one analysis window long".into(),
            ));
        }
        if f64::from(self.sample_rate) / 2.0 <= F3_GRID[F3_GRID.len() - 1] * self.formant_scale {
            return Err(Error::Config("sample rate too low for the class formants".into()));
        }
        Ok(())
    }

    pub fn num_samples(&self) -> usize {
        (self.utterance_duration_s * f64::from(self.sample_rate)).round() as usize
    }
}

/// The fixed frequency triple of a class.
///
/// Indices are chosen by residues modulo the grid sizes (pairwise coprime),
/// so distinct classes below [`MAX_CLASSES`] never share a triple and
/// differing components are at least 150 Hz apart.
pub fn class_frequencies(class: usize) -> [f64; 3] {
    [
        F1_GRID[class % F1_GRID.len()],
        F2_GRID[class % F2_GRID.len()],
        F3_GRID[class % F3_GRID.len()],
    ]
}

/// Frame labels for a segment layout: each frame takes the class of the
/// segment containing its centre sample.
fn frame_labels(segments: &[(usize, usize, u32)], num_samples: usize, stft: &StftConfig) -> Vec<u32> {
    let frames = stft.num_frames(num_samples);
    let mut out = Vec::with_capacity(frames);
    let mut seg = 0;
    for t in 0..frames {
        let centre = t * stft.hop_length + stft.window_length / 2;
        while segments[seg].1 <= centre {
            seg += 1;
        }
        out.push(segments[seg].2);
    }
    out
}

/// Audio and labels for utterance `index` of `spec`.
pub fn synth_utterance(spec: &SynthCorpusSpec, index: usize) -> (AudioBuffer, FrameLabels) {
    let mut rng = seed::rng(seed::split(spec.seed, index as u64));
    let sr = f64::from(spec.sample_rate);
    let n = spec.num_samples();
    let min_len = (MIN_SEGMENT_S * sr).round() as usize;
    let max_len = (MAX_SEGMENT_S * sr).round() as usize;

    let mut segments = Vec::new();
    let mut start = 0;
    while start < n {
        let len = rng.gen_range(min_len..=max_len);
        let class = rng.gen_range(0..spec.num_phoneme_classes) as u32;
        let end = (start + len).min(n);
        segments.push((start, end, class));
        start = end;
    }

    let mut samples = vec![0.0; n];
    for &(s, e, class) in &segments {
        let gain = rng.gen_range(0.6..1.0);
        let freqs = class_frequencies(class as usize);
        let phases: [f64; 3] = std::array::from_fn(|_| rng.gen_range(0.0..2.0 * PI));
        for (i, x) in samples[s..e].iter_mut().enumerate() {
            let t = (s + i) as f64 / sr;
            let mut v = 0.0;
            for k in 0..3 {
                v += FORMANT_AMPLITUDES[k] * (2.0 * PI * freqs[k] * spec.formant_scale * t + phases[k]).sin();
            }
            *x = gain * v;
        }
    }
    for x in samples.iter_mut() {
        *x += rng.gen_range(-1.0..1.0) * NOISE_FLOOR * 3f64.sqrt();
    }

    let labels = frame_labels(&segments, n, &StftConfig::default());
    let audio = AudioBuffer::clipped(samples, spec.sample_rate).expect("finite synthetic audio");
    let labels = FrameLabels {
        num_classes: spec.num_phoneme_classes,
        labels,
    };
    (audio, labels)
}

fn create_dir(p: &Path) -> Result<()> {
    fs::create_dir_all(p).map_err(|e| Error::io(p, e))
}

/// Writes `manifest.jsonl`, `audio/*.wav` and `labels/*.json` under `out_dir`.
pub fn generate_synth_corpus(spec: &SynthCorpusSpec, out_dir: impl AsRef<Path>) -> Result<Manifest> {
    spec.validate()?;
    let out_dir = out_dir.as_ref();
    create_dir(&out_dir.join("audio"))?;
    create_dir(&out_dir.join("labels"))?;

    let entries = (0..spec.num_utterances)
        .into_par_iter()
        .map(|i| {
            let id = format!("{}_{i:05}", spec.id_prefix);
            let (audio, labels) = synth_utterance(spec, i);
            let audio_rel = format!("audio/{id}.wav");
            let labels_rel = format!("labels/{id}.json");
            write_wav(&audio, out_dir.join(&audio_rel))?;
            labels.save(out_dir.join(&labels_rel))?;
            Ok(ManifestEntry {
                id,
                audio_path: audio_rel,
                duration_s: audio.duration_s(),
                labels_path: Some(labels_rel),
                source_tag: SourceTag::Clean,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let manifest = Manifest::new(entries, out_dir)?;
    manifest.save(out_dir.join("manifest.jsonl"))?;
    let spec_path = out_dir.join("corpus_spec.json");
    fs::write(&spec_path, serde_json::to_string_pretty(spec)?).map_err(|e| Error::io(&spec_path, e))?;
    Ok(manifest)
}

/// Background-noise corpus: low-passed white noise with a per-file colour.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseCorpusSpec {
    pub num_files: usize,
    pub duration_s: f64,
    pub sample_rate: u32,
    pub seed: u64,
    pub id_prefix: String,
}

impl Default for NoiseCorpusSpec {
    fn default() -> Self {
        Self {
            num_files: 4,
            duration_s: 3.0,
            sample_rate: super::CANONICAL_SAMPLE_RATE,
            seed: 0,
            id_prefix: "noise".into(),
        }
    }
}

pub fn synth_noise(spec: &NoiseCorpusSpec, index: usize) -> AudioBuffer {
    let mut rng = seed::rng(seed::split(spec.seed, index as u64));
    let n = (spec.duration_s * f64::from(spec.sample_rate)).round() as usize;
    let pole: f64 = rng.gen_range(0.0..0.95);
    let mut state = 0.0;
    let mut samples: Vec<f64> = (0..n)
        .map(|_| {
            state = pole * state + (1.0 - pole) * rng.gen_range(-1.0..1.0);
            state
        })
        .collect();
    let rms = (samples.iter().map(|s| s * s).sum::<f64>() / n.max(1) as f64).sqrt();
    if rms > 0.0 {
        for s in samples.iter_mut() {
            *s *= 0.1 / rms;
        }
    }
    AudioBuffer::clipped(samples, spec.sample_rate).expect("finite synthetic noise")
}

pub fn generate_noise_corpus(spec: &NoiseCorpusSpec, out_dir: impl AsRef<Path>) -> Result<Manifest> {
    if spec.num_files == 0 || !(spec.duration_s > 0.0) || spec.sample_rate == 0 {
        return Err(Error::Config("noise corpus counts must be positive".into()));
    }
    let out_dir = out_dir.as_ref();
    create_dir(&out_dir.join("audio"))?;
    let entries = (0..spec.num_files)
        .into_par_iter()
        .map(|i| {
            let id = format!("{}_{i:05}", spec.id_prefix);
            let audio = synth_noise(spec, i);
            let rel = format!("audio/{id}.wav");
            write_wav(&audio, out_dir.join(&rel))?;
            Ok(ManifestEntry {
                id,
                audio_path: rel,
                duration_s: audio.duration_s(),
                labels_path: None,
                source_tag: SourceTag::Clean,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let manifest = Manifest::new(entries, out_dir)?;
    manifest.save(out_dir.join("manifest.jsonl"))?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_second_gives_98_frames() {
        // 1 + floor((16000 - 400) / 160)
        let spec = SynthCorpusSpec {
            utterance_duration_s: 1.0,
            ..Default::default()
        };
        let (audio, labels) = synth_utterance(&spec, 0);
        assert_eq!(audio.len(), 16_000);
        assert_eq!(labels.len(), 98);
    }

    #[test]
    fn two_classes_only_use_zero_and_one() {
        let spec = SynthCorpusSpec {
            num_phoneme_classes: 2,
            ..Default::default()
        };
        for i in 0..5 {
            let (_, labels) = synth_utterance(&spec, i);
            assert!(labels.labels.iter().all(|&l| l < 2));
        }
    }

    #[test]
    fn class_triples_are_distinct_and_separated() {
        for a in 0..60 {
            for b in (a + 1)..60 {
                let (fa, fb) = (class_frequencies(a), class_frequencies(b));
                assert_ne!(fa, fb);
                for k in 0..3 {
                    let d = (fa[k] - fb[k]).abs();
                    assert!(d == 0.0 || d >= 150.0);
                }
            }
        }
        for f in class_frequencies(3) {
            assert!((200.0..=3500.0).contains(&f));
        }
    }

    #[test]
    fn audio_stays_in_range() {
        let (audio, _) = synth_utterance(&SynthCorpusSpec::default(), 3);
        assert!(audio.samples.iter().all(|s| s.abs() <= 1.0));
        assert!(audio.rms() > 0.05);
    }

    #[test]
    fn too_many_classes_rejected() {
        let spec = SynthCorpusSpec {
            num_phoneme_classes: MAX_CLASSES + 1,
            ..Default::default()
        };
        assert!(spec.validate().is_err());
    }
}
