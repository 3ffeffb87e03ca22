//! JSON artifacts.

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use kmd_core::GridShape;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Shape {
    pub rows: usize,
    pub cols: usize,
}

impl From<(usize, usize)> for Shape {
    fn from((rows, cols): (usize, usize)) -> Self {
        Self { rows, cols }
    }
}

/// `summary.json` of a decompose run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecomposeSummary {
    pub toolkit_version: String,
    pub command: String,
    pub method: String,
    pub rank: usize,
    /// Shape of the input file contents.
    pub data_shape: Shape,
    /// Shape after masking and cycle stacking.
    pub model_shape: Shape,
    /// Snapshot columns covered by the model, `k = 0 .. n_train - 1`.
    pub n_train: usize,
    pub dt_label: String,
    pub grid: GridShape,
    pub cycle: usize,
    /// `‖Y − Φ diag(b) Ξ‖_F²` over the columns the amplitudes were fitted to.
    pub cost: f64,
    pub loss_percent: f64,
    pub data_norm_squared: f64,
    /// `null` when the eigenvector matrix is singular.
    pub eigvec_condition: Option<f64>,
    pub gamma: Option<f64>,
    pub admm_iterations: Option<usize>,
    pub admm_converged: Option<bool>,
    pub config: RunConfig,
}

/// `summary.json` of a sweep run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub toolkit_version: String,
    pub command: String,
    pub method: String,
    pub rank: usize,
    pub data_shape: Shape,
    pub model_shape: Shape,
    pub n_train: usize,
    pub dt_label: String,
    pub data_norm_squared: f64,
    pub points: usize,
    pub not_converged: usize,
    pub config: RunConfig,
}

/// `recon_report.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReconReport {
    pub toolkit_version: String,
    pub rank: usize,
    pub n_train: usize,
    pub horizon: usize,
    pub requested: Vec<usize>,
    /// `‖x̂_k − x_k‖ / ‖x_k‖` for every training column (absolute error
    /// where `x_k = 0`).
    pub rel_error: Vec<f64>,
    pub max_rel_error: f64,
    /// Largest `‖Im‖/‖Re‖` of the complex sum over training and forecast steps.
    pub max_imag_ratio: Option<f64>,
    pub forecast_saturated: bool,
}

pub fn version() -> String {
    env!("CARGO_PKG_VERSION").to_string()
}
