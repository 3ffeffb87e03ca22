//! Companion-matrix DMD over the Krylov sequence of snapshots.
//!
//! The last snapshot is expressed as a least-squares combination of the
//! earlier ones, `x_{N-1} ≈ K c` with `K = [x_0 … x_{N-2}]`. The companion
//! matrix with ones on the subdiagonal and `c` in its last column then
//! advances `K` by one step, and its eigenvectors `T` give the modes `K T`.

use log::warn;
use nalgebra::{DMatrix, DVector};

use crate::dmd::{sorted_by_magnitude, DecompositionResult, Method, DEFECTIVE_CONDITION, RANK_TOLERANCE};
use crate::error::{KmdError, Result};
use crate::linalg::{self, to_complex, C64};
use crate::snapshots::SnapshotMatrix;

#[derive(Clone, Debug)]
pub struct CompanionModel {
    /// Last-column coefficients `c`, length `N-1`.
    pub coefficients: DVector<f64>,
    /// `‖x_{N-1} − K c‖₂`.
    pub residual_norm: f64,
    pub companion_eigenvalues: Vec<C64>,
}

impl CompanionModel {
    pub fn companion_matrix(&self) -> DMatrix<f64> {
        companion_matrix(&self.coefficients)
    }
}

pub fn companion_matrix(c: &DVector<f64>) -> DMatrix<f64> {
    let n = c.len();
    let mut m = DMatrix::zeros(n, n);
    for i in 1..n {
        m[(i, i - 1)] = 1.0;
    }
    m.column_mut(n - 1).copy_from(c);
    m
}

fn krylov(x: &SnapshotMatrix) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let n = x.ncols();
    if n < 3 {
        return Err(KmdError::TooFewSnapshots { needed: 3, got: n });
    }
    x.ensure_finite()?;
    let k = x.data().columns(0, n - 1).into_owned();
    let last = x.data().column(n - 1).into_owned();
    Ok((k, last))
}

fn fit_coefficients(k: &DMatrix<f64>, last: &DVector<f64>) -> (DVector<f64>, f64) {
    let (c, kept) = linalg::pinv_solve(k, last, RANK_TOLERANCE);
    if kept < k.ncols() {
        warn!(
            "snapshot sequence has numerical rank {kept} < {}; using the minimum-norm companion coefficients",
            k.ncols()
        );
    }
    let residual = (last - k * &c).norm();
    (c, residual)
}

/// Companion coefficients, residual and spectrum without modes.
pub fn companion_model(x: &SnapshotMatrix) -> Result<CompanionModel> {
    let (k, last) = krylov(x)?;
    let (coefficients, residual_norm) = fit_coefficients(&k, &last);
    let eigen = linalg::eig(&to_complex(&companion_matrix(&coefficients)))?;
    Ok(CompanionModel {
        coefficients,
        residual_norm,
        companion_eigenvalues: eigen.values,
    })
}

/// Companion DMD with amplitudes fitted against `[x_0 … x_{N-2}]`; columns
/// sorted by descending `|b|`.
pub fn companion_dmd(x: &SnapshotMatrix) -> Result<DecompositionResult> {
    let (k, last) = krylov(x)?;
    let (coefficients, _) = fit_coefficients(&k, &last);
    let eigen = linalg::eig(&to_complex(&companion_matrix(&coefficients)))?;
    let condition = linalg::condition_number(&eigen.vectors);
    if condition > DEFECTIVE_CONDITION {
        warn!("companion eigenbasis is close to defective: condition {condition:.3e}");
    }
    let modes = to_complex(&k) * &eigen.vectors;
    let result = sorted_by_magnitude(eigen.values, modes, Method::Cdmd, x.dt_label(), condition);
    result.fit_amplitudes(&k)
}

/// `||λ_i| − 1|` for every eigenvalue.
pub fn unit_circle_deviation(eigenvalues: &[C64]) -> Vec<f64> {
    eigenvalues.iter().map(|l| (l.norm() - 1.0).abs()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::ONE;

    #[test]
    fn geometric_sequence() {
        let v = DVector::from_vec(vec![1.0, 2.0, -1.0]);
        let x = SnapshotMatrix::new(DMatrix::from_fn(3, 6, |i, k| 0.5f64.powi(k as i32) * v[i]), "t");
        let model = companion_model(&x).unwrap();
        assert!(model.residual_norm <= 1e-10);
        // the coefficients reproduce the one-step relation on the last column
        let k = x.data().columns(0, 5).into_owned();
        let pred = &k * &model.coefficients;
        assert!((pred - x.data().column(5)).norm() < 1e-10);
        assert_eq!(model.companion_eigenvalues.len(), 5);
        assert!(model
            .companion_eigenvalues
            .iter()
            .any(|l| (l - C64::new(0.5, 0.0)).norm() < 1e-8));
    }

    #[test]
    fn constant_sequence_has_unit_eigenvalue() {
        let x = SnapshotMatrix::new(DMatrix::from_fn(2, 7, |i, _| 1.0 + i as f64), "t");
        let res = companion_dmd(&x).unwrap();
        assert_eq!(res.rank(), 6);
        assert_eq!(res.method, Method::Cdmd);
        assert!(res.eigenvalues.iter().any(|l| (l - ONE).norm() < 1e-8));
    }

    #[test]
    fn needs_three_snapshots() {
        let x = SnapshotMatrix::new(DMatrix::from_element(2, 2, 1.0), "t");
        assert!(matches!(companion_dmd(&x), Err(KmdError::TooFewSnapshots { needed: 3, .. })));
    }

    #[test]
    fn deviation() {
        let d = unit_circle_deviation(&[ONE, C64::new(0.0, 1.0), C64::new(-1.0, 0.0), C64::new(0.5, 0.0)]);
        assert_eq!(d, vec![0.0, 0.0, 0.0, 0.5]);
    }
}
