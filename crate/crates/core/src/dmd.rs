//! Exact dynamic mode decomposition.
//!
//! The best-fit linear map between time-shifted snapshots is compressed onto
//! the leading left singular vectors of `Y`:
//!
//! ```text
//! Y ≈ U Σ V*,   Ã = U* Y⁺ V Σ⁻¹,   Ã W = W Λ
//! Φ = Y⁺ V Σ⁻¹ W   (exact modes)     or   Φ = U W   (projected modes)
//! ```
//!
//! Amplitudes `b` are then fitted so that `Y ≈ Φ diag(b) Ξ`, where `Ξ` is the
//! Vandermonde matrix of eigenvalue powers.

use std::cmp::Ordering;
use std::f64::consts::PI;

use log::warn;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{KmdError, Result};
use crate::linalg::{self, to_complex, C64, ONE, ZERO};
use crate::snapshots::SnapshotPair;
use crate::spdmd::quadratic_form;

/// Relative threshold defining the numerical rank, `σ_i > 1e-10·σ_1`.
pub const RANK_TOLERANCE: f64 = 1e-10;

/// Eigenvector matrices conditioned worse than this are reported as defective.
pub const DEFECTIVE_CONDITION: f64 = 1e12;

#[derive(Clone, Debug)]
pub struct SvdFactors {
    pub u: DMatrix<f64>,
    /// Singular values, strictly positive and non-increasing.
    pub s: DVector<f64>,
    pub v: DMatrix<f64>,
    pub rank: usize,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeStyle {
    #[default]
    Exact,
    Projected,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    ExactDmd,
    ProjectedDmd,
    Cdmd,
    Spdmd,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::ExactDmd => "exact-dmd",
            Method::ProjectedDmd => "projected-dmd",
            Method::Cdmd => "cdmd",
            Method::Spdmd => "spdmd",
        }
    }
}

/// Eigenvalues, modes (one column each) and amplitudes of a decomposition.
///
/// Amplitudes stay `None` until [`DecompositionResult::fit_amplitudes`] runs.
/// `original_index[i]` identifies column `i` in the eigensolver output after
/// it was sorted by descending `|λ|`; it survives later reordering and mode
/// selection.
#[derive(Clone, Debug)]
pub struct DecompositionResult {
    pub eigenvalues: Vec<C64>,
    pub modes: DMatrix<C64>,
    pub amplitudes: Option<Vec<C64>>,
    pub original_index: Vec<usize>,
    pub method: Method,
    pub dt_label: String,
    /// 2-norm condition number of the eigenvector matrix.
    pub eigvec_condition: f64,
}

impl DecompositionResult {
    pub fn rank(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Fit amplitudes against `y` (one column per time step starting at 0) and
    /// reorder by descending `|b|`.
    pub fn fit_amplitudes(mut self, y: &DMatrix<f64>) -> Result<Self> {
        let xi = vandermonde(&self.eigenvalues, y.ncols());
        let b = optimal_amplitudes(y, &self.modes, &xi)?;
        self.amplitudes = Some(b);
        self.sort_by_amplitude();
        Ok(self)
    }

    /// Reorder columns by descending `|b|`, ties by ascending original index.
    pub fn sort_by_amplitude(&mut self) {
        let Some(b) = &self.amplitudes else {
            return;
        };
        let mut order: Vec<usize> = (0..b.len()).collect();
        order.sort_by(|&i, &j| {
            b[j].norm()
                .partial_cmp(&b[i].norm())
                .unwrap_or(Ordering::Equal)
                .then(self.original_index[i].cmp(&self.original_index[j]))
        });
        self.permute(&order);
    }

    /// Keep the listed columns, in the given order.
    pub(crate) fn permute(&mut self, order: &[usize]) {
        self.eigenvalues = order.iter().map(|&i| self.eigenvalues[i]).collect();
        self.modes = self.modes.select_columns(order.iter());
        self.original_index = order.iter().map(|&i| self.original_index[i]).collect();
        if let Some(b) = &self.amplitudes {
            self.amplitudes = Some(order.iter().map(|&i| b[i]).collect());
        }
    }

    pub fn vandermonde(&self, m: usize) -> Vandermonde {
        vandermonde(&self.eigenvalues, m)
    }
}

/// Eigenvalue powers, entry `(i, k) = λ_i^k`.
#[derive(Clone, Debug, PartialEq)]
pub struct Vandermonde {
    pub data: DMatrix<C64>,
}

/// Leading singular triplets of `y`. Without an explicit rank the numerical
/// rank (`σ_i > 1e-10·σ_1`) is used.
pub fn truncated_svd(y: &DMatrix<f64>, rank: Option<usize>) -> Result<SvdFactors> {
    if y.is_empty() {
        return Err(KmdError::Dimension("SVD of an empty matrix".into()));
    }
    let kmax = y.nrows().min(y.ncols());
    if let Some(r) = rank {
        if r == 0 || r > kmax {
            return Err(KmdError::InvalidArgument(format!(
                "rank {r} outside 1..={kmax} for a {}x{} matrix",
                y.nrows(),
                y.ncols()
            )));
        }
    }
    let svd = linalg::svd(y);
    let s = &svd.s;
    let sigma1 = s[0];
    if !(sigma1 > 0.0) {
        return Err(KmdError::ZeroMatrix);
    }
    let r = match rank {
        Some(r) => {
            if let Some(i) = (0..r).find(|&i| !(s[i] > 0.0)) {
                return Err(KmdError::ZeroSingularValue { index: i });
            }
            r
        }
        None => s.iter().take_while(|&&v| v > RANK_TOLERANCE * sigma1).count(),
    };
    let u = svd.u.columns(0, r).into_owned();
    let v = svd.v.columns(0, r).into_owned();
    Ok(SvdFactors {
        u,
        s: s.rows(0, r).into_owned(),
        v,
        rank: r,
    })
}

/// Exact (or projected) DMD of a snapshot pair. Columns are ordered by
/// descending `|λ|`; amplitudes are left unset.
pub fn exact_dmd(pair: &SnapshotPair, rank: Option<usize>, style: ModeStyle) -> Result<DecompositionResult> {
    let svd = truncated_svd(&pair.y, rank)?;
    let s_inv = DMatrix::from_diagonal(&svd.s.map(|v| 1.0 / v));
    // Y⁺ V Σ⁻¹, shared by the compressed operator and the exact modes
    let yp_v_sinv = &pair.y_plus * &svd.v * s_inv;
    let a_tilde = svd.u.transpose() * &yp_v_sinv;

    let eigen = linalg::eig(&to_complex(&a_tilde))?;
    let condition = linalg::condition_number(&eigen.vectors);
    if condition > DEFECTIVE_CONDITION {
        warn!("reduced operator is close to defective: eigenvector condition {condition:.3e}");
    }
    let (modes, method) = match style {
        ModeStyle::Exact => (to_complex(&yp_v_sinv) * &eigen.vectors, Method::ExactDmd),
        ModeStyle::Projected => (to_complex(&svd.u) * &eigen.vectors, Method::ProjectedDmd),
    };
    Ok(sorted_by_magnitude(eigen.values, modes, method, &pair.dt_label, condition))
}

pub(crate) fn sorted_by_magnitude(
    values: Vec<C64>,
    modes: DMatrix<C64>,
    method: Method,
    dt_label: &str,
    condition: f64,
) -> DecompositionResult {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| {
        values[j]
            .norm()
            .partial_cmp(&values[i].norm())
            .unwrap_or(Ordering::Equal)
            .then(i.cmp(&j))
    });
    let eigenvalues = order.iter().map(|&i| values[i]).collect();
    let modes = modes.select_columns(order.iter());
    DecompositionResult {
        original_index: (0..order.len()).collect(),
        eigenvalues,
        modes,
        amplitudes: None,
        method,
        dt_label: dt_label.to_string(),
        eigvec_condition: condition,
    }
}

/// Vandermonde matrix with `m` columns built by repeated multiplication.
/// Entries that underflow below the smallest normal magnitude are set to zero.
pub fn vandermonde(eigenvalues: &[C64], m: usize) -> Vandermonde {
    let r = eigenvalues.len();
    let mut data = DMatrix::<C64>::zeros(r, m);
    for (i, &lam) in eigenvalues.iter().enumerate() {
        let mut power = ONE;
        for k in 0..m {
            data[(i, k)] = power;
            power *= lam;
            if power.norm() < f64::MIN_POSITIVE {
                power = ZERO;
            }
        }
    }
    Vandermonde { data }
}

/// Amplitudes minimising `‖Y − Φ diag(b) Ξ‖_F²`.
pub fn optimal_amplitudes(y: &DMatrix<f64>, modes: &DMatrix<C64>, xi: &Vandermonde) -> Result<Vec<C64>> {
    let form = quadratic_form(y, modes, xi)?;
    let (b, info) = linalg::hermitian_solve(&form.p, &form.q);
    if info.min_norm {
        warn!(
            "amplitude normal equations are ill-conditioned ({:.3e}); using the minimum-norm solution",
            info.condition
        );
    }
    Ok(b.iter().cloned().collect())
}

/// Magnitude, e-folding time and period of one eigenvalue, in units of the
/// snapshot spacing.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ModeStats {
    pub magnitude: f64,
    /// `1/|Re log λ|`, infinite for neutral modes.
    pub e_folding: f64,
    /// `2π/Im log λ`, signed (negative for clockwise rotation); infinite for
    /// real positive eigenvalues.
    pub period: f64,
}

impl ModeStats {
    /// Unsigned period for display.
    pub fn abs_period(&self) -> f64 {
        self.period.abs()
    }
}

pub fn mode_stats(lambda: C64) -> Result<ModeStats> {
    if lambda.norm() == 0.0 {
        return Err(KmdError::InvalidArgument("mode statistics of a zero eigenvalue".into()));
    }
    let log = lambda.ln();
    let e_folding = if log.re.abs() < 1e-12 {
        f64::INFINITY
    } else {
        1.0 / log.re.abs()
    };
    let period = if log.im.abs() < 1e-12 {
        f64::INFINITY
    } else {
        2.0 * PI / log.im
    };
    Ok(ModeStats {
        magnitude: lambda.norm(),
        e_folding,
        period,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::snapshots::{build_pairs, SnapshotMatrix};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn svd_identity() {
        let f = truncated_svd(&DMatrix::identity(3, 3), Some(3)).unwrap();
        assert_eq!(f.rank, 3);
        for v in f.s.iter() {
            assert!((v - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn svd_rank_one_default() {
        let u = DVector::from_vec(vec![0.6, 0.8, 0.0]);
        let v = DVector::from_vec(vec![0.0, 1.0, 0.0, 0.0]);
        let y = &u * v.transpose() * 7.0;
        let f = truncated_svd(&y, None).unwrap();
        assert_eq!(f.rank, 1);
        assert!((f.s[0] - 7.0).abs() < 1e-12);
    }

    #[test]
    fn svd_errors() {
        assert!(matches!(truncated_svd(&DMatrix::zeros(3, 2), None), Err(KmdError::ZeroMatrix)));
        assert!(truncated_svd(&DMatrix::identity(3, 2), Some(3)).is_err());
        let mut y = DMatrix::zeros(3, 3);
        y[(0, 0)] = 1.0;
        assert!(matches!(
            truncated_svd(&y, Some(2)),
            Err(KmdError::ZeroSingularValue { index: 1 })
        ));
    }

    #[test]
    fn geometric_sequence_eigenvalue() {
        let v = DVector::from_vec(vec![1.0, -2.0, 0.5]);
        let x = DMatrix::from_fn(3, 20, |i, k| 0.9f64.powi(k as i32) * v[i]);
        let pair = build_pairs(&SnapshotMatrix::new(x, "t")).unwrap();
        let res = exact_dmd(&pair, Some(1), ModeStyle::Exact).unwrap();
        assert!((res.eigenvalues[0] - c(0.9, 0.0)).norm() < 1e-10);
    }

    #[test]
    fn constant_field_eigenvalue() {
        let x = DMatrix::from_fn(4, 6, |i, _| i as f64 + 1.0);
        let pair = build_pairs(&SnapshotMatrix::new(x, "t")).unwrap();
        let res = exact_dmd(&pair, None, ModeStyle::Projected).unwrap();
        assert_eq!(res.rank(), 1, "{:?}", res.eigenvalues);
        assert!((res.eigenvalues[0] - ONE).norm() < 1e-10, "{:?}", res.eigenvalues);
        assert_eq!(res.method, Method::ProjectedDmd);
    }

    #[test]
    fn vandermonde_small_cases() {
        let v = vandermonde(&[c(2.0, 0.0)], 3);
        assert_eq!(v.data.row(0).iter().cloned().collect::<Vec<_>>(), vec![c(1.0, 0.0), c(2.0, 0.0), c(4.0, 0.0)]);
        let v = vandermonde(&[c(0.0, 1.0)], 4);
        let expect = [c(1.0, 0.0), c(0.0, 1.0), c(-1.0, 0.0), c(0.0, -1.0)];
        for k in 0..4 {
            assert!((v.data[(0, k)] - expect[k]).norm() < 1e-15);
        }
    }

    #[test]
    fn vandermonde_underflow_clamps() {
        let v = vandermonde(&[c(0.5, 0.0)], 1200);
        assert_eq!(v.data[(0, 1199)], ZERO);
        assert!(v.data.iter().all(|z| z.re == 0.0 || z.re.is_normal()));
    }

    #[test]
    fn amplitudes_scalar_and_zero() {
        let phi = DMatrix::from_column_slice(2, 1, &[ONE, ZERO]);
        let xi = vandermonde(&[ONE], 2);
        let y = DMatrix::from_row_slice(2, 2, &[2.0, 2.0, 0.0, 0.0]);
        let b = optimal_amplitudes(&y, &phi, &xi).unwrap();
        assert!((b[0] - c(2.0, 0.0)).norm() < 1e-12);
        let b0 = optimal_amplitudes(&DMatrix::zeros(2, 2), &phi, &xi).unwrap();
        assert_eq!(b0[0].norm(), 0.0);
    }

    #[test]
    fn stats_from_table_header() {
        let s = mode_stats(ONE).unwrap();
        assert_eq!((s.magnitude, s.e_folding, s.period), (1.0, f64::INFINITY, f64::INFINITY));
        let s = mode_stats(c(0.0, -1.0)).unwrap();
        assert!((s.magnitude - 1.0).abs() < 1e-15);
        assert!((s.period + 4.0).abs() < 1e-12);
        assert!((s.abs_period() - 4.0).abs() < 1e-12);
        let s = mode_stats(c((-0.1f64).exp(), 0.0)).unwrap();
        assert!((s.e_folding - 10.0).abs() < 1e-9);
        assert_eq!(s.period, f64::INFINITY);
        assert!(mode_stats(ZERO).is_err());
    }
}
