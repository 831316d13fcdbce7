use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::reference;
use crate::apc::PretrainConfig;
use crate::augment::{NoiseAugSpec, PitchAugSpec};
use crate::error::{Error, Result};
use crate::probe::FinetuneConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyKind {
    /// Base manifest only.
    Baseline,
    /// More genuine in-domain speech (the oracle series).
    CleanExtra,
    /// Speech from another corpus (accent or language analogue).
    CorpusMix,
    Noise,
    Pitch,
    #[serde(alias = "mix")]
    NoisePitchMix,
}

impl StrategyKind {
    pub fn as_str(self) -> &'static str {
        match self {
            StrategyKind::Baseline => "baseline",
            StrategyKind::CleanExtra => "clean_extra",
            StrategyKind::CorpusMix => "corpus_mix",
            StrategyKind::Noise => "noise",
            StrategyKind::Pitch => "pitch",
            StrategyKind::NoisePitchMix => "noise_pitch_mix",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.to_string()))
            .map_err(|_| Error::Config(format!("unknown strategy {s:?}")))
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StrategyRatios {
    pub strategy: StrategyKind,
    pub ratios: Vec<u32>,
}

/// One experiment grid. Relative manifest paths resolve against the spec
/// file's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    #[serde(default)]
    pub name: String,
    pub base_manifest: PathBuf,
    pub finetune_manifest: PathBuf,
    pub test_manifest: PathBuf,
    /// Required by `noise` and `noise_pitch_mix`.
    #[serde(default)]
    pub noise_manifest: Option<PathBuf>,
    /// Pool of extra in-domain speech, required by `clean_extra`.
    #[serde(default)]
    pub extra_clean_manifest: Option<PathBuf>,
    /// Other-corpus pool, required by `corpus_mix`.
    #[serde(default)]
    pub other_corpus_manifest: Option<PathBuf>,
    pub strategies: Vec<StrategyRatios>,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub pretrain: PretrainConfig,
    #[serde(default)]
    pub finetune: FinetuneConfig,
    #[serde(default = "default_snrs")]
    pub snr_choices_db: Vec<f64>,
    #[serde(default)]
    pub pitch: PitchAugSpec,
    #[serde(default)]
    pub stack_effects: bool,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    /// Keep generated augmentation audio after a cell completes.
    #[serde(default)]
    pub keep_audio: bool,
}

fn default_snrs() -> Vec<f64> {
    NoiseAugSpec::DEFAULT_SNRS_DB.to_vec()
}

impl ExperimentSpec {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut spec: ExperimentSpec = serde_json::from_str(&text)?;
        let dir = path.parent().unwrap_or(Path::new(""));
        spec.resolve_paths(dir);
        spec.validate()?;
        Ok(spec)
    }

    /// Makes relative paths relative to `dir`.
    pub fn resolve_paths(&mut self, dir: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        };
        fix(&mut self.base_manifest);
        fix(&mut self.finetune_manifest);
        fix(&mut self.test_manifest);
        for p in [
            &mut self.noise_manifest,
            &mut self.extra_clean_manifest,
            &mut self.other_corpus_manifest,
            &mut self.output_dir,
        ]
        .into_iter()
        .flatten()
        {
            fix(p);
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::Config("experiment needs at least one seed".into()));
        }
        let mut seen = std::collections::HashSet::new();
        for s in &self.seeds {
            if !seen.insert(s) {
                return Err(Error::Config(format!("seed {s} listed twice")));
            }
        }
        let mut kinds = std::collections::HashSet::new();
        for sr in &self.strategies {
            if sr.strategy == StrategyKind::Baseline {
                return Err(Error::Config("the baseline always runs; do not list it".into()));
            }
            if !kinds.insert(sr.strategy) {
                return Err(Error::Config(format!("strategy {} listed twice", sr.strategy)));
            }
            if sr.ratios.is_empty() || sr.ratios.contains(&0) {
                return Err(Error::Config(format!("{} needs positive ratios", sr.strategy)));
            }
            let mut r = sr.ratios.clone();
            r.sort_unstable();
            r.dedup();
            if r.len() != sr.ratios.len() {
                return Err(Error::Config(format!("{} has duplicate ratios", sr.strategy)));
            }
            let needs = |opt: &Option<PathBuf>, what: &str| {
                if opt.is_none() {
                    Err(Error::Config(format!("{} requires {what}", sr.strategy)))
                } else {
                    Ok(())
                }
            };
            match sr.strategy {
                StrategyKind::Noise | StrategyKind::NoisePitchMix => {
                    needs(&self.noise_manifest, "noise_manifest")?
                }
                StrategyKind::CleanExtra => needs(&self.extra_clean_manifest, "extra_clean_manifest")?,
                StrategyKind::CorpusMix => needs(&self.other_corpus_manifest, "other_corpus_manifest")?,
                _ => {}
            }
        }
        self.pretrain.validate()?;
        if self.finetune.batch_size == 0 || !(self.finetune.learning_rate > 0.0) {
            return Err(Error::Config("invalid fine-tuning config".into()));
        }
        Ok(())
    }

    /// The full-scale grid shape: ratios 1-3 for every strategy, plus the
    /// extended ratios for the noise/pitch mix.
    pub fn reference_grid_strategies() -> Vec<StrategyRatios> {
        let common = reference::COMMON_RATIOS.to_vec();
        vec![
            StrategyRatios {
                strategy: StrategyKind::CleanExtra,
                ratios: common.clone(),
            },
            StrategyRatios {
                strategy: StrategyKind::CorpusMix,
                ratios: common.clone(),
            },
            StrategyRatios {
                strategy: StrategyKind::Noise,
                ratios: common.clone(),
            },
            StrategyRatios {
                strategy: StrategyKind::Pitch,
                ratios: common,
            },
            StrategyRatios {
                strategy: StrategyKind::NoisePitchMix,
                ratios: reference::MIX_RATIOS.to_vec(),
            },
        ]
    }
}
