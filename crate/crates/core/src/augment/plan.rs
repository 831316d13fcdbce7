use std::fs;
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{mix_noise_at, pitch_shift};
use crate::audio_io::{read_wav, write_wav, AudioBuffer, Manifest, ManifestEntry, SourceTag};
use crate::error::{Error, Result};
use crate::seed;

/// Noise augmentation: a noise corpus and the SNR values to draw from.
#[derive(Debug, Clone)]
pub struct NoiseAugSpec {
    pub noise_manifest: Manifest,
    pub snr_choices_db: Vec<f64>,
}

impl NoiseAugSpec {
    pub const DEFAULT_SNRS_DB: [f64; 3] = [5.0, 10.0, 15.0];

    pub fn new(noise_manifest: Manifest) -> Self {
        Self {
            noise_manifest,
            snr_choices_db: Self::DEFAULT_SNRS_DB.to_vec(),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.noise_manifest.is_empty() {
            return Err(Error::Config(
                "noise augmentation needs a non-empty noise manifest".into(),
            ));
        }
        if self.snr_choices_db.is_empty() || self.snr_choices_db.iter().any(|s| !s.is_finite()) {
            return Err(Error::Config("SNR choices must be non-empty and finite".into()));
        }
        Ok(())
    }
}

/// Pitch augmentation: shifts uniform in `±[dead_zone, max_semitones]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PitchAugSpec {
    pub max_semitones: f64,
    pub dead_zone: f64,
}

impl Default for PitchAugSpec {
    fn default() -> Self {
        Self {
            max_semitones: 2.0,
            dead_zone: 0.25,
        }
    }
}

impl PitchAugSpec {
    fn validate(&self) -> Result<()> {
        if !(self.dead_zone >= 0.0 && self.dead_zone < self.max_semitones && self.max_semitones <= 12.0) {
            return Err(Error::Config(format!("invalid pitch range {self:?}")));
        }
        Ok(())
    }

    pub fn draw(&self, rng: &mut impl Rng) -> f64 {
        let mag = rng.gen_range(self.dead_zone..=self.max_semitones);
        if rng.gen_bool(0.5) {
            mag
        } else {
            -mag
        }
    }
}

#[derive(Debug, Clone)]
pub enum AugmentationStrategy {
    Noise(NoiseAugSpec),
    Pitch(PitchAugSpec),
    /// Each augmented utterance gets noise or pitch with equal probability,
    /// or both in sequence when `stack_effects` is set.
    NoisePitchMix {
        noise: NoiseAugSpec,
        pitch: PitchAugSpec,
        stack_effects: bool,
    },
    /// Appends `ratio` times the base duration taken from another corpus.
    CorpusMix {
        other: Manifest,
    },
}

impl AugmentationStrategy {
    pub fn name(&self) -> &'static str {
        match self {
            AugmentationStrategy::Noise(_) => "noise",
            AugmentationStrategy::Pitch(_) => "pitch",
            AugmentationStrategy::NoisePitchMix { .. } => "noise_pitch_mix",
            AugmentationStrategy::CorpusMix { .. } => "corpus_mix",
        }
    }
}

#[derive(Debug, Clone)]
pub struct AugmentationPlan {
    pub base: Manifest,
    pub strategy: AugmentationStrategy,
    pub ratio: u32,
    pub seed: u64,
}

/// Entries from the front of `other` totalling about `seconds`, re-identified
/// as `{prefix}{id}` with paths made absolute.
///
/// Fails when `other` holds less than 99% of the requested duration.
pub fn take_duration(
    other: &Manifest,
    seconds: f64,
    prefix: &str,
    tag: SourceTag,
) -> Result<Vec<ManifestEntry>> {
    let available = other.total_duration_s();
    if available < seconds * 0.99 {
        return Err(Error::InvalidInput(format!(
            "other manifest holds {available:.1} s but {seconds:.1} s were requested"
        )));
    }
    let mut out = Vec::new();
    let mut total = 0.0;
    for e in &other.entries {
        if total >= seconds {
            break;
        }
        // Stop short when that lands closer to the target than overshooting.
        if !out.is_empty() && seconds - total < total + e.duration_s - seconds {
            break;
        }
        total += e.duration_s;
        let mut ne = other.absolutized(e);
        ne.id = format!("{prefix}{}", e.id);
        ne.source_tag = tag;
        out.push(ne);
    }
    Ok(out)
}

fn load_all(manifest: &Manifest) -> Result<Vec<AudioBuffer>> {
    manifest
        .entries
        .par_iter()
        .map(|e| read_wav(manifest.audio_path(e)))
        .collect()
}

fn apply_noise(
    audio: &AudioBuffer,
    spec: &NoiseAugSpec,
    noises: &[AudioBuffer],
    rng: &mut impl Rng,
) -> Result<AudioBuffer> {
    let noise = &noises[rng.gen_range(0..noises.len())];
    let snr = spec.snr_choices_db[rng.gen_range(0..spec.snr_choices_db.len())];
    let offset = rng.gen_range(0..noise.len().max(1));
    Ok(mix_noise_at(audio, noise, snr, offset)?.audio)
}

/// Materializes the augmented corpus under `out_dir` and returns its manifest
/// (`out_dir/manifest.jsonl`): the base entries followed by `ratio` augmented
/// copies of the base (copy-major), or by the mixed-in corpus.
///
/// Every random draw for utterance `i` of copy `c` comes from a stream seeded
/// by `(seed, c, i)`, so the output does not depend on thread scheduling.
pub fn expand_plan(plan: &AugmentationPlan, out_dir: impl AsRef<Path>) -> Result<Manifest> {
    let out_dir = out_dir.as_ref();
    if plan.base.is_empty() {
        return Err(Error::InvalidInput("base manifest is empty".into()));
    }
    if plan.ratio == 0 {
        return Err(Error::Config("augmentation ratio must be at least 1".into()));
    }
    let audio_dir = out_dir.join("audio");
    fs::create_dir_all(&audio_dir).map_err(|e| Error::io(&audio_dir, e))?;

    let mut entries: Vec<ManifestEntry> = plan
        .base
        .entries
        .iter()
        .map(|e| plan.base.absolutized(e))
        .collect();

    let (noise_spec, pitch_spec, stack) = match &plan.strategy {
        AugmentationStrategy::CorpusMix { other } => {
            let target = f64::from(plan.ratio) * plan.base.total_duration_s();
            entries.extend(take_duration(other, target, "mix.", SourceTag::MixedCorpus)?);
            return finish(entries, out_dir);
        }
        AugmentationStrategy::Noise(n) => (Some(n), None, false),
        AugmentationStrategy::Pitch(p) => (None, Some(*p), false),
        AugmentationStrategy::NoisePitchMix {
            noise,
            pitch,
            stack_effects,
        } => (Some(noise), Some(*pitch), *stack_effects),
    };
    if let Some(n) = noise_spec {
        n.validate()?;
    }
    if let Some(p) = &pitch_spec {
        p.validate()?;
    }
    let noises = match noise_spec {
        Some(n) => load_all(&n.noise_manifest)?,
        None => Vec::new(),
    };

    let base_len = plan.base.len();
    let jobs: Vec<(u32, usize)> = (1..=plan.ratio)
        .flat_map(|c| (0..base_len).map(move |i| (c, i)))
        .collect();
    let generated = jobs
        .par_iter()
        .map(|&(copy, i)| {
            let entry = &plan.base.entries[i];
            let stream = u64::from(copy) * base_len as u64 + i as u64;
            let mut rng = seed::rng(seed::split(plan.seed, stream));
            let audio = read_wav(plan.base.audio_path(entry))?;
            let (audio, tag) = match (noise_spec, pitch_spec) {
                (Some(n), None) => (apply_noise(&audio, n, &noises, &mut rng)?, SourceTag::NoiseAug),
                (None, Some(p)) => (pitch_shift(&audio, p.draw(&mut rng))?, SourceTag::PitchAug),
                (Some(n), Some(p)) if stack => {
                    let shifted = pitch_shift(&audio, p.draw(&mut rng))?;
                    (apply_noise(&shifted, n, &noises, &mut rng)?, SourceTag::NoiseAug)
                }
                (Some(n), Some(p)) => {
                    if rng.gen_bool(0.5) {
                        (apply_noise(&audio, n, &noises, &mut rng)?, SourceTag::NoiseAug)
                    } else {
                        (pitch_shift(&audio, p.draw(&mut rng))?, SourceTag::PitchAug)
                    }
                }
                (None, None) => unreachable!("strategy without an effect"),
            };
            let id = format!("{}.{}.{copy}", entry.id, tag.as_str());
            let rel = format!("audio/{id}.wav");
            write_wav(&audio, out_dir.join(&rel))?;
            Ok(ManifestEntry {
                id,
                audio_path: rel,
                duration_s: audio.duration_s(),
                labels_path: plan.base.absolutized(entry).labels_path,
                source_tag: tag,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    entries.extend(generated);
    finish(entries, out_dir)
}

fn finish(entries: Vec<ManifestEntry>, out_dir: &Path) -> Result<Manifest> {
    let manifest = Manifest::new(entries, out_dir)?;
    manifest.save(out_dir.join("manifest.jsonl"))?;
    Ok(manifest)
}
