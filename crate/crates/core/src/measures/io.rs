use std::path::Path;

use serde::{Deserialize, Serialize};

use super::DiscreteMeasure;
use crate::error::Result;

/// On-disk form of a [`DiscreteMeasure`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureFile {
    pub ambient_dim: usize,
    pub points: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    /// Atomic resolution; absent means exactly atomic.
    #[serde(default)]
    pub resolution: f64,
}

impl From<&DiscreteMeasure> for MeasureFile {
    fn from(m: &DiscreteMeasure) -> Self {
        MeasureFile {
            ambient_dim: m.ambient_dim(),
            points: m.points().map(<[f64]>::to_vec).collect(),
            weights: m.weights().to_vec(),
            resolution: m.resolution(),
        }
    }
}

impl TryFrom<MeasureFile> for DiscreteMeasure {
    type Error = crate::error::Error;

    fn try_from(f: MeasureFile) -> Result<Self> {
        let m = DiscreteMeasure::new(f.ambient_dim, f.points, f.weights)?;
        Ok(m.with_resolution(f.resolution))
    }
}

impl DiscreteMeasure {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&MeasureFile::from(self))?)
    }

    /// Parse and validate. NaN, infinities and negative weights are rejected.
    pub fn from_json(text: &str) -> Result<Self> {
        let file: MeasureFile = serde_json::from_str(text)?;
        file.try_into()
    }

    pub fn read_json(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
