//! The run report written next to every registration result.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sphereqc::boost::LossBreakdown;
use sphereqc::metrics::QualityRow;

use crate::config::RunConfig;

/// Final metrics on the user mesh. `ncc` and `dice` are present when the
/// run matched fields or labels; the `_identity` values are the same
/// measures before any deformation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FinalMetrics {
    #[serde(flatten)]
    pub quality: QualityRow,
    pub ncc: Option<f64>,
    pub ncc_identity: Option<f64>,
    pub dice: Option<f64>,
    pub dice_identity: Option<f64>,
}

/// Chart-level distortion on the standard disks.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChartDistortion {
    pub mean_mu: f64,
    pub max_mu: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutputFiles {
    pub deformed: PathBuf,
    pub face_mu: PathBuf,
    pub loss_history: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub config: RunConfig,
    pub iterations: usize,
    pub converged: bool,
    /// Folds remained at termination.
    pub failed: bool,
    pub seconds: f64,
    /// Loss terms at the returned iterate, as the optimizer evaluated them.
    pub breakdown: LossBreakdown,
    pub metrics: FinalMetrics,
    pub chart: ChartDistortion,
    pub files: OutputFiles,
    pub history: Vec<LossBreakdown>,
}

impl Report {
    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing report {}", path.display()))
    }
}
