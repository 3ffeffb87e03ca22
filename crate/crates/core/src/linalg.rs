//! Dense linear-algebra helpers layered on nalgebra.
//!
//! nalgebra supplies Hessenberg/Schur, QR, Cholesky and Hermitian
//! eigendecompositions. General (non-Hermitian) eigenvectors are recovered
//! here from the complex Schur form by triangular back-substitution, and the
//! SVD is a one-sided Jacobi iteration (nalgebra 0.35's bidiagonal SVD returns
//! inconsistent singular vectors on rank-deficient and wide inputs).

use nalgebra::{Cholesky, ComplexField, DMatrix, DVector, Schur, SymmetricEigen};

use crate::error::{KmdError, Result};

pub use nalgebra::Complex;

/// Double-precision complex scalar.
pub type C64 = Complex<f64>;

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);
pub(crate) const ONE: C64 = C64::new(1.0, 0.0);

pub fn to_complex(m: &DMatrix<f64>) -> DMatrix<C64> {
    m.map(|v| C64::new(v, 0.0))
}

/// Eigenvalues and unit 2-norm eigenvectors (one per column) of a square matrix.
#[derive(Clone, Debug)]
pub struct Eigen {
    pub values: Vec<C64>,
    pub vectors: DMatrix<C64>,
}

/// Full eigendecomposition `A = W Λ W⁻¹` of a general complex matrix.
pub fn eig(a: &DMatrix<C64>) -> Result<Eigen> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(KmdError::Dimension(format!(
            "eigendecomposition of a non-square {}x{} matrix",
            a.nrows(),
            a.ncols()
        )));
    }
    if n == 0 {
        return Ok(Eigen {
            values: Vec::new(),
            vectors: DMatrix::zeros(0, 0),
        });
    }
    if a.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(KmdError::InvalidArgument(
            "eigendecomposition of a matrix with non-finite entries".into(),
        ));
    }

    let (q, t) = schur(a)?;
    let x = triangular_eigenvectors(&t);
    let mut vectors = q * x;
    for mut col in vectors.column_iter_mut() {
        let norm = col.norm();
        if norm > 0.0 {
            col.unscale_mut(norm);
        }
    }
    let values = (0..n).map(|i| t[(i, i)]).collect();
    Ok(Eigen { values, vectors })
}

fn schur(a: &DMatrix<C64>) -> Result<(DMatrix<C64>, DMatrix<C64>)> {
    let n = a.nrows();
    let max_iter = 200 * n.max(10);
    if let Some(s) = Schur::try_new(a.clone(), f64::EPSILON, max_iter) {
        return Ok(s.unpack());
    }
    // Francis shifts stall on permutation-like Hessenberg structure (e.g. the
    // companion matrix of z^n - 1). A fixed Householder similarity breaks the
    // structure without changing the spectrum.
    let h = fixed_reflector(n);
    let rotated = &h * a * &h;
    let s = Schur::try_new(rotated, f64::EPSILON, max_iter).ok_or(KmdError::EigenFailure { dim: n })?;
    let (q, t) = s.unpack();
    Ok((h * q, t))
}

/// Deterministic dense Householder reflector `I - 2vv*/v*v`.
fn fixed_reflector(n: usize) -> DMatrix<C64> {
    let v = DVector::from_fn(n, |i, _| {
        let x = i as f64 + 1.0;
        C64::new((0.7 * x).sin() + 1.3, (1.1 * x).cos())
    });
    let vv = v.norm_squared();
    let mut h = DMatrix::identity(n, n);
    h -= (&v * v.adjoint()) * C64::new(2.0 / vv, 0.0);
    h
}

/// Eigenvectors of an upper-triangular matrix, one per diagonal entry.
fn triangular_eigenvectors(t: &DMatrix<C64>) -> DMatrix<C64> {
    let n = t.nrows();
    let tnorm = t.iter().fold(0.0f64, |m, v| m.max(v.norm()));
    let small = if tnorm > 0.0 {
        f64::EPSILON * tnorm
    } else {
        f64::MIN_POSITIVE
    };
    let mut x = DMatrix::<C64>::zeros(n, n);
    for k in 0..n {
        let lambda = t[(k, k)];
        x[(k, k)] = ONE;
        for i in (0..k).rev() {
            let mut acc = ZERO;
            for j in i + 1..=k {
                acc += t[(i, j)] * x[(j, k)];
            }
            let mut d = t[(i, i)] - lambda;
            if d.norm() < small {
                d = C64::new(small, 0.0);
            }
            let xi = -acc / d;
            x[(i, k)] = xi;
            let mag = xi.norm();
            if mag > 1e150 {
                for j in i..=k {
                    x[(j, k)] /= mag;
                }
            }
        }
    }
    x
}

/// Thin singular value decomposition `A = U diag(s) V*` with `s` sorted in
/// descending order. Singular vectors paired with a zero singular value may be
/// zero (in `U` for tall inputs, in `V` for wide ones).
#[derive(Clone, Debug)]
pub struct Svd<T: ComplexField> {
    pub u: DMatrix<T>,
    pub s: DVector<f64>,
    pub v: DMatrix<T>,
}

const JACOBI_MAX_SWEEPS: usize = 80;

/// One-sided (Hestenes) Jacobi SVD. Tall inputs are first reduced by QR.
pub fn svd<T>(a: &DMatrix<T>) -> Svd<T>
where
    T: ComplexField<RealField = f64> + Copy,
{
    let (m, n) = a.shape();
    if m < n {
        let t = svd(&a.adjoint());
        return Svd {
            u: t.v,
            s: t.s,
            v: t.u,
        };
    }
    if n == 0 {
        return Svd {
            u: DMatrix::zeros(m, 0),
            s: DVector::zeros(0),
            v: DMatrix::zeros(0, 0),
        };
    }
    if m >= 2 * n {
        let qr = a.clone().qr();
        let inner = jacobi_svd(qr.r());
        return Svd {
            u: qr.q() * inner.u,
            s: inner.s,
            v: inner.v,
        };
    }
    jacobi_svd(a.clone())
}

fn jacobi_svd<T>(mut g: DMatrix<T>) -> Svd<T>
where
    T: ComplexField<RealField = f64> + Copy,
{
    let (m, n) = g.shape();
    let mut v = DMatrix::<T>::identity(n, n);
    let tol = f64::EPSILON * (m as f64).sqrt();
    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for i in 0..n.saturating_sub(1) {
            for j in i + 1..n {
                let alpha = g.column(i).norm_squared();
                let beta = g.column(j).norm_squared();
                if alpha == 0.0 || beta == 0.0 {
                    continue;
                }
                let gamma = g.column(i).dotc(&g.column(j));
                let abs = gamma.modulus();
                if abs <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                // rotate column j's phase so the pair product is real
                let phase = gamma.unscale(abs).conjugate();
                let zeta = (beta - alpha) / (2.0 * abs);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate_columns(&mut g, i, j, phase, c, s);
                rotate_columns(&mut v, i, j, phase, c, s);
            }
        }
        if !rotated {
            break;
        }
    }

    let norms: Vec<f64> = g.column_iter().map(|c| c.norm()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| norms[b].partial_cmp(&norms[a]).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b)));
    let mut u = DMatrix::<T>::zeros(m, n);
    let mut vs = DMatrix::<T>::zeros(n, n);
    let mut s = DVector::<f64>::zeros(n);
    for (k, &src) in order.iter().enumerate() {
        s[k] = norms[src];
        if norms[src] > 0.0 {
            u.set_column(k, &g.column(src).unscale(norms[src]));
        }
        vs.set_column(k, &v.column(src));
    }
    Svd { u, s, v: vs }
}

fn rotate_columns<T>(m: &mut DMatrix<T>, i: usize, j: usize, phase: T, c: f64, s: f64)
where
    T: ComplexField<RealField = f64> + Copy,
{
    for k in 0..m.nrows() {
        let x = m[(k, i)];
        let y = m[(k, j)] * phase;
        m[(k, i)] = x.scale(c) - y.scale(s);
        m[(k, j)] = x.scale(s) + y.scale(c);
    }
}

/// 2-norm condition number `σ_max / σ_min`; infinite when singular.
pub fn condition_number(m: &DMatrix<C64>) -> f64 {
    if m.is_empty() {
        return 1.0;
    }
    let s = svd(m).s;
    let max = s.iter().cloned().fold(0.0f64, f64::max);
    let min = s.iter().cloned().fold(f64::INFINITY, f64::min);
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// How a Hermitian system was solved.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolveInfo {
    pub condition: f64,
    pub min_norm: bool,
}

/// Conditions above this switch the Hermitian solve to the minimum-norm route.
pub const MIN_NORM_CONDITION: f64 = 1e14;

/// Solve `P x = q` for a Hermitian positive-semidefinite `P`.
///
/// Uses Cholesky while the condition estimate is at most `1e14`, otherwise the
/// minimum-norm solution from the Hermitian eigendecomposition.
pub fn hermitian_solve(p: &DMatrix<C64>, q: &DVector<C64>) -> (DVector<C64>, SolveInfo) {
    let n = p.nrows();
    if n == 0 {
        return (
            DVector::zeros(0),
            SolveInfo {
                condition: 1.0,
                min_norm: false,
            },
        );
    }
    let eigen = SymmetricEigen::new(p.clone());
    let max = eigen.eigenvalues.iter().cloned().fold(0.0f64, f64::max);
    let min = eigen.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    let condition = if min <= 0.0 || max <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    };

    if condition <= MIN_NORM_CONDITION {
        if let Some(chol) = Cholesky::new(p.clone()) {
            return (
                chol.solve(q),
                SolveInfo {
                    condition,
                    min_norm: false,
                },
            );
        }
    }

    let cutoff = n as f64 * f64::EPSILON * max;
    let mut x = DVector::<C64>::zeros(n);
    if max > 0.0 {
        for (k, &ev) in eigen.eigenvalues.iter().enumerate() {
            if ev > cutoff {
                let w = eigen.eigenvectors.column(k);
                let coeff = w.dotc(q) / ev;
                x.axpy(coeff, &w, ONE);
            }
        }
    }
    (
        x,
        SolveInfo {
            condition,
            min_norm: true,
        },
    )
}

/// Minimum-norm least-squares solution of `A x ≈ b` for real `A`, discarding
/// singular values at or below `rel_cutoff · σ_1`. Also returns the number of
/// singular values kept.
pub fn pinv_solve(a: &DMatrix<f64>, b: &DVector<f64>, rel_cutoff: f64) -> (DVector<f64>, usize) {
    let f = svd(a);
    let sigma_max = f.s.iter().cloned().fold(0.0f64, f64::max);
    let mut x = DVector::<f64>::zeros(a.ncols());
    let mut kept = 0;
    if sigma_max == 0.0 {
        return (x, 0);
    }
    for (k, &sv) in f.s.iter().enumerate() {
        if sv > rel_cutoff * sigma_max {
            let coeff = f.u.column(k).dot(b) / sv;
            x.axpy(coeff, &f.v.column(k), 1.0);
            kept += 1;
        }
    }
    (x, kept)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn residual(a: &DMatrix<C64>, e: &Eigen) -> f64 {
        let lam = DMatrix::from_diagonal(&DVector::from_vec(e.values.clone()));
        (a * &e.vectors - &e.vectors * lam).norm()
    }

    #[test]
    fn eig_diagonal() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![c(1.0, 0.0), c(2.0, 0.0), c(-3.0, 1.0)]));
        let e = eig(&a).unwrap();
        let mut vals: Vec<_> = e.values.iter().map(|v| (v.re, v.im)).collect();
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(vals, vec![(-3.0, 1.0), (1.0, 0.0), (2.0, 0.0)]);
        assert!(residual(&a, &e) < 1e-12);
    }

    #[test]
    fn eig_rotation_has_conjugate_pair() {
        let th = 0.3f64;
        let a = to_complex(&DMatrix::from_row_slice(
            3,
            3,
            &[th.cos(), -th.sin(), 0.0, th.sin(), th.cos(), 0.0, 0.0, 0.0, 0.5],
        ));
        let e = eig(&a).unwrap();
        assert!(residual(&a, &e) < 1e-12);
        let target = C64::from_polar(1.0, th);
        assert!(e.values.iter().any(|v| (v - target).norm() < 1e-12));
        assert!(e.values.iter().any(|v| (v - target.conj()).norm() < 1e-12));
    }

    #[test]
    fn eig_cyclic_permutation() {
        // companion of z^6 - 1: ones on the subdiagonal, one in the corner
        let n = 6;
        let mut a = DMatrix::<C64>::zeros(n, n);
        for i in 1..n {
            a[(i, i - 1)] = ONE;
        }
        a[(0, n - 1)] = ONE;
        let e = eig(&a).unwrap();
        assert!(residual(&a, &e) < 1e-10);
        for k in 0..n {
            let root = C64::from_polar(1.0, 2.0 * std::f64::consts::PI * k as f64 / n as f64);
            assert!(e.values.iter().any(|v| (v - root).norm() < 1e-10), "missing root {root}");
        }
    }

    #[test]
    fn eig_unit_norm_columns() {
        let a = DMatrix::from_fn(7, 7, |i, j| c(((i * 7 + j) as f64).sin(), ((i + 2 * j) as f64).cos()));
        let e = eig(&a).unwrap();
        for col in e.vectors.column_iter() {
            assert!((col.norm() - 1.0).abs() < 1e-12);
        }
        assert!(residual(&a, &e) < 1e-10);
    }

    fn check_svd<T: ComplexField<RealField = f64> + Copy>(a: &DMatrix<T>) {
        let f = svd(a);
        let k = a.nrows().min(a.ncols());
        assert_eq!(f.s.len(), k);
        assert!(f.s.as_slice().windows(2).all(|w| w[0] >= w[1]));
        let sd = DMatrix::from_diagonal(&f.s.map(|v| T::from_real(v)));
        let rec = &f.u * sd * f.v.adjoint();
        assert!((rec - a).norm() <= 1e-12 * a.norm().max(1.0));
        let r = f.s.iter().filter(|&&v| v > 1e-12 * f.s[0]).count();
        let eye = DMatrix::<T>::identity(r, r);
        let u = f.u.columns(0, r);
        let v = f.v.columns(0, r);
        assert!((u.adjoint() * u - &eye).norm() < 1e-12);
        assert!((v.adjoint() * v - &eye).norm() < 1e-12);
    }

    #[test]
    fn svd_reconstructs_real_and_complex() {
        check_svd(&DMatrix::from_fn(4, 5, |i, _| i as f64 + 1.0));
        check_svd(&DMatrix::from_fn(5, 4, |_, j| j as f64 + 1.0));
        check_svd(&DMatrix::from_fn(9, 4, |i, j| ((i * 4 + j) as f64 * 0.77).sin()));
        check_svd(&DMatrix::from_fn(6, 6, |i, j| ((i * 6 + j) as f64).sin()));
        check_svd(&DMatrix::from_fn(5, 3, |i, j| c(((i + j) as f64).cos(), (i as f64 - j as f64).sin())));
        check_svd(&DMatrix::<f64>::zeros(3, 2));
    }

    #[test]
    fn svd_rank_one_values() {
        let f = svd(&DMatrix::from_fn(4, 5, |i, _| i as f64 + 1.0));
        assert!((f.s[0] - 30f64.sqrt() * 5f64.sqrt()).abs() < 1e-12);
        assert!(f.s[1] < 1e-14);
    }

    #[test]
    fn hermitian_solve_min_norm_on_singular() {
        // P = diag(2, 0): min-norm solution of P x = [4, 0] is [2, 0]
        let p = DMatrix::from_diagonal(&DVector::from_vec(vec![c(2.0, 0.0), ZERO]));
        let q = DVector::from_vec(vec![c(4.0, 0.0), ZERO]);
        let (x, info) = hermitian_solve(&p, &q);
        assert!(info.min_norm);
        assert!((x[0] - c(2.0, 0.0)).norm() < 1e-14);
        assert!(x[1].norm() < 1e-14);
    }

    #[test]
    fn pinv_solve_min_norm() {
        // x0 + x1 = 2 -> min norm [1, 1]
        let a = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
        let b = DVector::from_vec(vec![2.0]);
        let (x, kept) = pinv_solve(&a, &b, 1e-10);
        assert_eq!(kept, 1);
        assert!((x[0] - 1.0).abs() < 1e-14 && (x[1] - 1.0).abs() < 1e-14);
    }
}
