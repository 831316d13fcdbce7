use std::collections::HashSet;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::FrameLabels;
use crate::error::{Error, Result};

/// Provenance of a manifest entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceTag {
    Clean,
    NoiseAug,
    PitchAug,
    MixedCorpus,
}

impl SourceTag {
    pub fn as_str(self) -> &'static str {
        match self {
            SourceTag::Clean => "clean",
            SourceTag::NoiseAug => "noise_aug",
            SourceTag::PitchAug => "pitch_aug",
            SourceTag::MixedCorpus => "mixed_corpus",
        }
    }
}

/// One utterance record. Field order is the on-disk key order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub audio_path: String,
    pub duration_s: f64,
    pub labels_path: Option<String>,
    pub source_tag: SourceTag,
}

/// An ordered list of utterances.
///
/// Relative paths inside entries are resolved against `base_dir`, the
/// directory of the manifest file they were loaded from.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Manifest {
    pub entries: Vec<ManifestEntry>,
    pub base_dir: PathBuf,
}

impl Manifest {
    pub fn new(entries: Vec<ManifestEntry>, base_dir: impl Into<PathBuf>) -> Result<Self> {
        let m = Self {
            entries,
            base_dir: base_dir.into(),
        };
        m.validate()?;
        Ok(m)
    }

    fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for e in &self.entries {
            if !seen.insert(e.id.as_str()) {
                return Err(Error::DuplicateId(e.id.clone()));
            }
            if !(e.duration_s > 0.0 && e.duration_s.is_finite()) {
                return Err(Error::InvalidInput(format!(
                    "entry {} has non-positive duration {}",
                    e.id, e.duration_s
                )));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn total_duration_s(&self) -> f64 {
        self.entries.iter().map(|e| e.duration_s).sum()
    }

    pub fn total_hours(&self) -> f64 {
        self.total_duration_s() / 3600.0
    }

    pub fn ids(&self) -> HashSet<&str> {
        self.entries.iter().map(|e| e.id.as_str()).collect()
    }

    fn resolve(&self, p: &str) -> PathBuf {
        let path = Path::new(p);
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base_dir.join(path)
        }
    }

    pub fn audio_path(&self, entry: &ManifestEntry) -> PathBuf {
        self.resolve(&entry.audio_path)
    }

    pub fn labels_path(&self, entry: &ManifestEntry) -> Option<PathBuf> {
        entry.labels_path.as_deref().map(|p| self.resolve(p))
    }

    pub fn load_labels(&self, entry: &ManifestEntry) -> Result<FrameLabels> {
        let p = self
            .labels_path(entry)
            .ok_or_else(|| Error::MissingLabels(entry.id.clone()))?;
        FrameLabels::load(p)
    }

    /// Copy of `entry` whose paths no longer depend on `base_dir`.
    pub fn absolutized(&self, entry: &ManifestEntry) -> ManifestEntry {
        let abs = |p: PathBuf| {
            let p = if p.is_absolute() {
                p
            } else {
                std::env::current_dir().map(|d| d.join(&p)).unwrap_or(p)
            };
            p.to_string_lossy().into_owned()
        };
        ManifestEntry {
            audio_path: abs(self.audio_path(entry)),
            labels_path: self.labels_path(entry).map(abs),
            ..entry.clone()
        }
    }

    /// Serializes one JSON object per line.
    pub fn to_jsonl(&self) -> Result<String> {
        let mut out = String::new();
        for e in &self.entries {
            out.push_str(&serde_json::to_string(e)?);
            out.push('\n');
        }
        Ok(out)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = self.to_jsonl()?;
        let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut entries = Vec::new();
        let mut seen = HashSet::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let entry: ManifestEntry = serde_json::from_str(line).map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                message: e.to_string(),
            })?;
            if !seen.insert(entry.id.clone()) {
                return Err(Error::DuplicateId(entry.id));
            }
            entries.push(entry);
        }
        let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Manifest::new(entries, base_dir)
    }
}

/// Loads a line-delimited JSON manifest. Audio files are not checked here.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<Manifest> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Manifest::parse(&text, path)
}
