#![allow(dead_code)]

use kmd_core::synthetic::{Oscillator, PlantedSystem};
use kmd_core::C64;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn real_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.gen_range(-1.0..1.0))
}

pub fn complex_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<C64> {
    DMatrix::from_fn(rows, cols, |_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
}

pub fn complex_vector(rng: &mut ChaCha8Rng, n: usize) -> DVector<C64> {
    DVector::from_fn(n, |_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
}

/// `‖Y − Φ diag(b) Ξ‖_F²` evaluated entry by entry.
pub fn frobenius_objective(y: &DMatrix<f64>, phi: &DMatrix<C64>, b: &DVector<C64>, xi: &DMatrix<C64>) -> f64 {
    let mut total = 0.0;
    for i in 0..y.nrows() {
        for k in 0..y.ncols() {
            let mut model = c(0.0, 0.0);
            for j in 0..b.len() {
                model += phi[(i, j)] * b[j] * xi[(j, k)];
            }
            total += (c(y[(i, k)], 0.0) - model).norm_sqr();
        }
    }
    total
}

/// Ten modes (two real, four conjugate pairs), damped so `|λ| ∈ [0.8, 1]`.
pub fn ten_mode_oscillators(amplitudes: [f64; 6]) -> Vec<Oscillator> {
    let spec = [(1.0, 0.0), (0.9, 0.0), (0.98, 0.3), (0.95, 0.7), (0.9, 1.2), (0.85, 2.0)];
    spec.iter()
        .zip(amplitudes)
        .enumerate()
        .map(|(i, (&(m, a), amp))| Oscillator::new(m, a, C64::from_polar(amp, 0.4 * i as f64)))
        .collect()
}

pub fn planted(p: usize, oscillators: &[Oscillator]) -> PlantedSystem {
    PlantedSystem::new(p, oscillators).expect("valid planted system")
}

/// Distance from each planted eigenvalue to its nearest estimate.
pub fn max_eigenvalue_error(planted: &[C64], estimated: &[C64]) -> f64 {
    planted
        .iter()
        .map(|l| estimated.iter().map(|e| (e - l).norm()).fold(f64::INFINITY, f64::min))
        .fold(0.0, f64::max)
}
