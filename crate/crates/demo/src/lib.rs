//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Each scenario plants oscillators `(magnitude, angle, amplitude)` on a
//! 40-point field, adds uniform noise, and runs the decomposition.

use kmd_core::synthetic::{Oscillator, PlantedSystem};
use kmd_core::{
    build_pairs, companion_dmd, exact_dmd, gamma_sweep, log_grid, quadratic_form, DecompositionResult, ModeStyle,
    ReducedOrderModel, SnapshotMatrix, SweepParams, C64,
};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wasm_bindgen::prelude::*;

const FIELD: usize = 40;

fn err(e: impl std::fmt::Display) -> JsError {
    JsError::new(&e.to_string())
}

/// `params` holds consecutive `(magnitude, angle, amplitude)` triples.
fn planted_data(params: &[f64], steps: usize, noise: f64, seed: u32) -> Result<(PlantedSystem, DMatrix<f64>), String> {
    if params.is_empty() || params.len() % 3 != 0 {
        return Err("oscillators are (magnitude, angle, amplitude) triples".into());
    }
    if steps < 3 {
        return Err("need at least 3 snapshots".into());
    }
    let osc: Vec<Oscillator> = params
        .chunks(3)
        .enumerate()
        .map(|(i, t)| Oscillator::new(t[0], t[1], C64::from_polar(t[2], 0.4 * i as f64)))
        .collect();
    let sys = PlantedSystem::new(FIELD, &osc).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed as u64);
    let data = sys.snapshots(steps).map(|v| v + noise * rng.gen_range(-1.0..1.0));
    Ok((sys, data))
}

fn fitted(data: &DMatrix<f64>, rank: Option<usize>) -> Result<(DecompositionResult, DMatrix<f64>), String> {
    let pair = build_pairs(&SnapshotMatrix::new(data.clone(), "step")).map_err(|e| e.to_string())?;
    let res = exact_dmd(&pair, rank, ModeStyle::Exact)
        .and_then(|r| r.fit_amplitudes(&pair.y))
        .map_err(|e| e.to_string())?;
    Ok((res, pair.y))
}

fn interleave(values: &[C64]) -> Vec<f64> {
    values.iter().flat_map(|v| [v.re, v.im]).collect()
}

fn rank_for(n_modes: usize, steps: usize) -> Option<usize> {
    Some(n_modes.min(steps - 1))
}

/// Planted, exact-DMD and companion-DMD eigenvalues, each as `[re, im, re, im, …]`.
#[wasm_bindgen]
pub struct Spectra {
    planted: Vec<f64>,
    dmd: Vec<f64>,
    cdmd: Vec<f64>,
}

#[wasm_bindgen]
impl Spectra {
    pub fn planted(&self) -> Vec<f64> {
        self.planted.clone()
    }

    pub fn dmd(&self) -> Vec<f64> {
        self.dmd.clone()
    }

    pub fn cdmd(&self) -> Vec<f64> {
        self.cdmd.clone()
    }
}

#[wasm_bindgen]
pub fn spectra(params: Vec<f64>, steps: usize, noise: f64, seed: u32) -> Result<Spectra, JsError> {
    let (sys, data) = planted_data(&params, steps, noise, seed).map_err(err)?;
    let (res, _) = fitted(&data, rank_for(sys.eigenvalues.len(), steps)).map_err(err)?;
    let companion = companion_dmd(&SnapshotMatrix::new(data, "step")).map_err(err)?;
    Ok(Spectra {
        planted: interleave(&sys.eigenvalues),
        dmd: interleave(&res.eigenvalues),
        cdmd: interleave(&companion.eigenvalues),
    })
}

/// One row per γ of a sparsity sweep.
#[wasm_bindgen]
pub struct SweepCurve {
    gammas: Vec<f64>,
    cardinality: Vec<f64>,
    loss_percent: Vec<f64>,
}

#[wasm_bindgen]
impl SweepCurve {
    pub fn gammas(&self) -> Vec<f64> {
        self.gammas.clone()
    }

    pub fn cardinality(&self) -> Vec<f64> {
        self.cardinality.clone()
    }

    pub fn loss_percent(&self) -> Vec<f64> {
        self.loss_percent.clone()
    }
}

#[wasm_bindgen]
pub fn sweep(
    params: Vec<f64>,
    steps: usize,
    noise: f64,
    seed: u32,
    gamma_min: f64,
    gamma_max: f64,
    count: usize,
) -> Result<SweepCurve, JsError> {
    let (sys, data) = planted_data(&params, steps, noise, seed).map_err(err)?;
    let (res, y) = fitted(&data, rank_for(sys.eigenvalues.len(), steps)).map_err(err)?;
    let form = quadratic_form(&y, &res.modes, &res.vandermonde(y.ncols())).map_err(err)?;
    let grid = log_grid(gamma_min, gamma_max, count).map_err(err)?;
    let sweep = gamma_sweep(&form, &grid, SweepParams::default()).map_err(err)?;
    Ok(SweepCurve {
        gammas: sweep.points.iter().map(|p| p.gamma).collect(),
        cardinality: sweep.points.iter().map(|p| p.cardinality as f64).collect(),
        loss_percent: sweep.points.iter().map(|p| p.loss_percent).collect(),
    })
}

/// `Re(λ^t b)` per mode (conjugate pairs combined), row-major `rows × steps`.
#[wasm_bindgen]
pub struct Temporal {
    rows: usize,
    steps: usize,
    data: Vec<f64>,
    eigenvalues: Vec<f64>,
}

#[wasm_bindgen]
impl Temporal {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn data(&self) -> Vec<f64> {
        self.data.clone()
    }

    /// Eigenvalue behind each row, `[re, im, …]`.
    pub fn eigenvalues(&self) -> Vec<f64> {
        self.eigenvalues.clone()
    }
}

#[wasm_bindgen]
pub fn temporal(params: Vec<f64>, steps: usize, noise: f64, seed: u32, horizon: usize) -> Result<Temporal, JsError> {
    let (sys, data) = planted_data(&params, steps, noise, seed).map_err(err)?;
    let (res, _) = fitted(&data, rank_for(sys.eigenvalues.len(), steps)).map_err(err)?;
    let model = ReducedOrderModel::from_result(&res).map_err(err)?;
    let dyn_ = model.temporal_dynamics(0..horizon, true).map_err(err)?;
    let eigenvalues: Vec<C64> = dyn_.tuple_rows.iter().map(|&j| model.tuples()[j].eigenvalue).collect();
    Ok(Temporal {
        rows: dyn_.data.nrows(),
        steps: horizon,
        data: dyn_.data.transpose().as_slice().to_vec(),
        eigenvalues: interleave(&eigenvalues),
    })
}
