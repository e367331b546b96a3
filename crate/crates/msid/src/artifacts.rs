//! On-disk artifact formats produced and consumed by the command-line tool.

use serde::{Deserialize, Serialize};

use msid_core::files::DesignFile;

/// Sidecar describing a simulated dataset directory.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetFile {
    pub design: DesignFile,
    pub sigma: Vec<Vec<f64>>,
    pub seed: u64,
    pub n: usize,
    /// Per-experiment CSV files (`t, y1..y_ny`), in experiment order.
    pub files: Vec<String>,
}

/// Result of a parametric fit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitFile {
    pub theta: Vec<f64>,
    pub cost: f64,
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kernel: Option<Vec<Vec<f64>>>,
    pub iterations: usize,
    pub gradient_norm: f64,
}

/// Concentration radii report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundsFile {
    pub frf_radius: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta_radius: Option<f64>,
    pub mse_bound: f64,
    pub gaussian_tail_radius: f64,
    pub delta: f64,
    pub n: usize,
}
