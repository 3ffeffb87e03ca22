//! Forward-constructed snapshot data with a known Koopman spectrum.

use std::f64::consts::FRAC_1_SQRT_2;

use nalgebra::{DMatrix, DVector};

use crate::error::{KmdError, Result};
use crate::linalg::C64;

/// One planted oscillator: `λ = magnitude·e^{i·angle}`. Angles strictly
/// between 0 and π produce a conjugate pair; 0 or π a single real mode.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Oscillator {
    pub magnitude: f64,
    pub angle: f64,
    pub amplitude: C64,
}

impl Oscillator {
    pub fn new(magnitude: f64, angle: f64, amplitude: C64) -> Self {
        Self {
            magnitude,
            angle,
            amplitude,
        }
    }

    fn is_pair(&self) -> bool {
        let s = self.angle.sin();
        s.abs() > 1e-12
    }
}

/// Conjugate-complete set of tuples with mutually orthogonal unit modes.
#[derive(Clone, Debug)]
pub struct PlantedSystem {
    pub eigenvalues: Vec<C64>,
    pub modes: DMatrix<C64>,
    pub amplitudes: Vec<C64>,
}

impl PlantedSystem {
    /// Modes are built from an orthonormal basis of `p`-vectors: a real mode
    /// uses one basis vector, a pair uses `(e_a ± i e_b)/√2`.
    pub fn new(p: usize, oscillators: &[Oscillator]) -> Result<Self> {
        let needed: usize = oscillators.iter().map(|o| if o.is_pair() { 2 } else { 1 }).sum();
        if needed > p {
            return Err(KmdError::InvalidArgument(format!(
                "{needed} planted modes need at least {needed} spatial points, got {p}"
            )));
        }
        let basis = orthonormal_basis(p, needed);
        let mut eigenvalues = Vec::new();
        let mut amplitudes = Vec::new();
        let mut cols: Vec<DVector<C64>> = Vec::new();
        let mut next = 0;
        for o in oscillators {
            let lambda = C64::from_polar(o.magnitude, o.angle);
            if o.is_pair() {
                let a = basis.column(next).map(|v| C64::new(v, 0.0));
                let b = basis.column(next + 1).map(|v| C64::new(0.0, v));
                next += 2;
                let phi = (a + b) * C64::new(FRAC_1_SQRT_2, 0.0);
                eigenvalues.push(lambda);
                amplitudes.push(o.amplitude);
                cols.push(phi.clone());
                eigenvalues.push(lambda.conj());
                amplitudes.push(o.amplitude.conj());
                cols.push(phi.map(|v| v.conj()));
            } else {
                eigenvalues.push(C64::new(lambda.re, 0.0));
                amplitudes.push(C64::new(o.amplitude.re, 0.0));
                cols.push(basis.column(next).map(|v| C64::new(v, 0.0)));
                next += 1;
            }
        }
        Ok(Self {
            eigenvalues,
            modes: DMatrix::from_columns(&cols),
            amplitudes,
        })
    }

    /// `p × n` real snapshots `y_k = Σ_j φ_j λ_j^k b_j`.
    pub fn snapshots(&self, n: usize) -> DMatrix<f64> {
        let p = self.modes.nrows();
        let mut out = DMatrix::zeros(p, n);
        for (j, (&lambda, &b)) in self.eigenvalues.iter().zip(&self.amplitudes).enumerate() {
            let mut power = b;
            for k in 0..n {
                for i in 0..p {
                    out[(i, k)] += (self.modes[(i, j)] * power).re;
                }
                power *= lambda;
            }
        }
        out
    }
}

/// `count` orthonormal columns of length `p` from a fixed smooth family.
fn orthonormal_basis(p: usize, count: usize) -> DMatrix<f64> {
    if count == 0 {
        return DMatrix::zeros(p, 0);
    }
    let raw = DMatrix::from_fn(p, count, |i, j| {
        let x = (i as f64 + 0.5) / p as f64;
        ((j as f64 + 1.0) * 2.3 * x + 0.37 * j as f64).sin() + 0.1 * ((i * (j + 3)) as f64).cos()
    });
    raw.qr().q()
}
