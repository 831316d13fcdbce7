use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-frame phoneme class indices for one utterance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameLabels {
    pub num_classes: usize,
    pub labels: Vec<u32>,
}

impl FrameLabels {
    pub fn new(num_classes: usize, labels: Vec<u32>) -> Result<Self> {
        let l = Self { num_classes, labels };
        l.validate()?;
        Ok(l)
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_classes == 0 {
            return Err(Error::InvalidInput("num_classes must be positive".into()));
        }
        if let Some(&bad) = self.labels.iter().find(|&&l| l as usize >= self.num_classes) {
            return Err(Error::LabelOutOfRange {
                label: bad as usize,
                num_classes: self.num_classes,
            });
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let labels: FrameLabels = serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: e.line(),
            message: e.to_string(),
        })?;
        labels.validate()?;
        Ok(labels)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, serde_json::to_string(self)?).map_err(|e| Error::io(path, e))
    }
}
