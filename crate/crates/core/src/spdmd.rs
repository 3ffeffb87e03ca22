//! Sparsity-promoting amplitude selection.
//!
//! The reconstruction error is a quadratic in the amplitudes,
//!
//! ```text
//! ‖Y − Φ diag(b) Ξ‖_F² = b*Pb − q*b − b*q + s
//! P = (Φ*Φ) ∘ conj(ΞΞ*),  q = conj(diag(Ξ Y* Φ)),  s = ‖Y‖_F²
//! ```
//!
//! and `J(b) + γ‖b‖₁` is minimised by ADMM. The sparsity pattern found for each
//! `γ` is then polished by solving the least-squares problem on that support.

use log::warn;
use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};
use serde::Serialize;

use crate::dmd::{DecompositionResult, Method, Vandermonde};
use crate::error::{KmdError, Result};
use crate::linalg::{self, C64, ZERO};

/// Entries with `|b_i| ≤ 1e-12·max|b|` count as zero.
pub const ZERO_RELATIVE: f64 = 1e-12;

#[derive(Clone, Debug)]
pub struct QuadraticForm {
    pub p: DMatrix<C64>,
    pub q: DVector<C64>,
    pub s: f64,
}

impl QuadraticForm {
    pub fn dim(&self) -> usize {
        self.q.len()
    }

    /// `b*Pb − 2 Re(q*b) + s`.
    pub fn value(&self, b: &DVector<C64>) -> f64 {
        let pb = &self.p * b;
        b.dotc(&pb).re - 2.0 * self.q.dotc(b).re + self.s
    }

    /// Hermitian and positive-semidefinite checks.
    pub fn validate(&self) -> Result<()> {
        let n = self.dim();
        if self.p.shape() != (n, n) {
            return Err(KmdError::Dimension(format!(
                "P is {}x{} but q has length {n}",
                self.p.nrows(),
                self.p.ncols()
            )));
        }
        let scale = self.p.iter().fold(1.0f64, |m, v| m.max(v.norm()));
        let asym = (&self.p - self.p.adjoint()).iter().fold(0.0f64, |m, v| m.max(v.norm()));
        if asym > 1e-10 * scale {
            return Err(KmdError::InvalidForm(format!("P is not Hermitian (asymmetry {asym:.3e})")));
        }
        if n > 0 {
            let ev = SymmetricEigen::new(self.p.clone()).eigenvalues;
            let max = ev.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let min = ev.iter().cloned().fold(f64::INFINITY, f64::min);
            if min < -1e-8 * max.max(0.0) {
                return Err(KmdError::InvalidForm(format!(
                    "P is indefinite (eigenvalues span {min:.3e}..{max:.3e})"
                )));
            }
        }
        if !(self.s >= 0.0) {
            return Err(KmdError::InvalidForm(format!("constant term {} is negative", self.s)));
        }
        Ok(())
    }
}

pub fn quadratic_form(y: &DMatrix<f64>, modes: &DMatrix<C64>, xi: &Vandermonde) -> Result<QuadraticForm> {
    let (p_rows, m) = y.shape();
    let r = modes.ncols();
    if modes.nrows() != p_rows || xi.data.nrows() != r || xi.data.ncols() != m {
        return Err(KmdError::Dimension(format!(
            "Y is {p_rows}x{m}, Φ is {}x{r}, Ξ is {}x{}",
            modes.nrows(),
            xi.data.nrows(),
            xi.data.ncols()
        )));
    }
    let gram_modes = modes.ad_mul(modes);
    let gram_time = &xi.data * xi.data.adjoint();
    let mut p = gram_modes.zip_map(&gram_time, |a, b| a * b.conj());
    // exact Hermitian symmetry
    for i in 0..r {
        p[(i, i)].im = 0.0;
        for j in 0..i {
            let avg = (p[(i, j)] + p[(j, i)].conj()) * 0.5;
            p[(i, j)] = avg;
            p[(j, i)] = avg.conj();
        }
    }

    // diag(Ξ Y* Φ)_i = Σ_k Ξ_ik (Yᵀ Φ)_ki
    let yt_phi = linalg::to_complex(&y.transpose()) * modes;
    let q = DVector::from_fn(r, |i, _| {
        let mut acc = ZERO;
        for k in 0..m {
            acc += xi.data[(i, k)] * yt_phi[(k, i)];
        }
        acc.conj()
    });
    Ok(QuadraticForm {
        p,
        q,
        s: y.norm_squared(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AdmmParams {
    pub rho: f64,
    pub eps_abs: f64,
    pub eps_rel: f64,
    pub max_iter: usize,
}

impl Default for AdmmParams {
    fn default() -> Self {
        Self {
            rho: 1.0,
            eps_abs: 1e-6,
            eps_rel: 1e-4,
            max_iter: 10_000,
        }
    }
}

/// Splitting variables `(x, z, u)`, reusable as a warm start.
#[derive(Clone, Debug, PartialEq)]
pub struct AdmmState {
    pub x: DVector<C64>,
    pub z: DVector<C64>,
    pub u: DVector<C64>,
}

impl AdmmState {
    pub fn zeros(n: usize) -> Self {
        Self {
            x: DVector::zeros(n),
            z: DVector::zeros(n),
            u: DVector::zeros(n),
        }
    }
}

#[derive(Clone, Debug)]
pub struct AdmmOutcome {
    /// The thresholded iterate `z`; exact zeros mark dropped modes.
    pub b: DVector<C64>,
    pub iterations: usize,
    pub converged: bool,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub state: AdmmState,
}

/// Shrink the magnitude by `kappa`, keep the phase.
pub fn soft_threshold(v: C64, kappa: f64) -> C64 {
    let mag = v.norm();
    if mag <= kappa {
        ZERO
    } else {
        v * ((mag - kappa) / mag)
    }
}

/// ADMM for `min_b J(b) + γ Σ|b_i|` with a factorisation of `2P + ρI` shared
/// across every `γ`.
pub struct AdmmSolver<'a> {
    form: &'a QuadraticForm,
    params: AdmmParams,
    factor: Cholesky<C64, Dyn>,
}

impl<'a> AdmmSolver<'a> {
    pub fn new(form: &'a QuadraticForm, params: AdmmParams) -> Result<Self> {
        if !(params.rho > 0.0) {
            return Err(KmdError::InvalidArgument(format!("rho must be positive, got {}", params.rho)));
        }
        form.validate()?;
        let n = form.dim();
        let mut kkt = &form.p * C64::new(2.0, 0.0);
        for i in 0..n {
            kkt[(i, i)] += C64::new(params.rho, 0.0);
        }
        let factor = match Cholesky::new(kkt.clone()) {
            Some(f) => f,
            None => {
                let trace: f64 = (0..n).map(|i| form.p[(i, i)].re).sum();
                let shift = 1e-12 * trace / n.max(1) as f64;
                warn!("Cholesky of 2P + ρI failed; regularising P by {shift:.3e}");
                for i in 0..n {
                    kkt[(i, i)] += C64::new(2.0 * shift, 0.0);
                }
                Cholesky::new(kkt).ok_or_else(|| KmdError::InvalidForm("2P + ρI is not positive definite".into()))?
            }
        };
        Ok(Self { form, params, factor })
    }

    pub fn params(&self) -> &AdmmParams {
        &self.params
    }

    pub fn solve(&self, gamma: f64, warm: Option<&AdmmState>) -> Result<AdmmOutcome> {
        if !(gamma >= 0.0) || !gamma.is_finite() {
            return Err(KmdError::InvalidArgument(format!("gamma must be finite and ≥ 0, got {gamma}")));
        }
        let n = self.form.dim();
        if gamma == 0.0 {
            // no penalty: the splitting's fixed point is the normal-equation solution
            let (b, _) = linalg::hermitian_solve(&self.form.p, &self.form.q);
            return Ok(AdmmOutcome {
                state: AdmmState {
                    x: b.clone(),
                    z: b.clone(),
                    u: DVector::zeros(n),
                },
                b,
                iterations: 0,
                converged: true,
                primal_residual: 0.0,
                dual_residual: 0.0,
            });
        }

        let q_max = self.form.q.iter().fold(0.0f64, |m, v| m.max(v.norm()));
        if gamma >= 2.0 * q_max {
            // zero satisfies the subgradient condition |2q_i| ≤ γ
            let zero = DVector::zeros(n);
            return Ok(AdmmOutcome {
                state: AdmmState {
                    x: zero.clone(),
                    z: zero.clone(),
                    u: self.form.q.map(|v| v * (2.0 / self.params.rho)),
                },
                b: zero,
                iterations: 0,
                converged: true,
                primal_residual: 0.0,
                dual_residual: 0.0,
            });
        }

        let AdmmParams {
            rho,
            eps_abs,
            eps_rel,
            max_iter,
        } = self.params;
        let mut state = match warm {
            Some(w) if w.x.len() == n => w.clone(),
            _ => AdmmState::zeros(n),
        };
        let kappa = gamma / rho;
        let two_q = &self.form.q * C64::new(2.0, 0.0);
        let rho_c = C64::new(rho, 0.0);
        let sqrt_n = (n as f64).sqrt();

        let mut primal = f64::INFINITY;
        let mut dual = f64::INFINITY;
        for iter in 1..=max_iter {
            let rhs = &two_q + (&state.z - &state.u) * rho_c;
            state.x = self.factor.solve(&rhs);
            let z_old = std::mem::replace(&mut state.z, DVector::zeros(n));
            state.z = (&state.x + &state.u).map(|v| soft_threshold(v, kappa));
            state.u += &state.x - &state.z;

            primal = (&state.x - &state.z).norm();
            dual = rho * (&state.z - &z_old).norm();
            let eps_pri = sqrt_n * eps_abs + eps_rel * state.x.norm().max(state.z.norm());
            let eps_dual = sqrt_n * eps_abs + eps_rel * rho * state.u.norm();
            if primal <= eps_pri && dual <= eps_dual {
                return Ok(AdmmOutcome {
                    b: state.z.clone(),
                    iterations: iter,
                    converged: true,
                    primal_residual: primal,
                    dual_residual: dual,
                    state,
                });
            }
        }
        warn!("ADMM hit {max_iter} iterations at gamma = {gamma} (primal {primal:.3e}, dual {dual:.3e})");
        Ok(AdmmOutcome {
            b: state.z.clone(),
            iterations: max_iter,
            converged: false,
            primal_residual: primal,
            dual_residual: dual,
            state,
        })
    }
}

pub fn admm_solve(form: &QuadraticForm, gamma: f64, params: AdmmParams) -> Result<AdmmOutcome> {
    AdmmSolver::new(form, params)?.solve(gamma, None)
}

/// Indices of the entries of `b` that are not numerically zero.
pub fn support_of(b: &DVector<C64>) -> Vec<usize> {
    let max = b.iter().fold(0.0f64, |m, v| m.max(v.norm()));
    if max == 0.0 {
        return Vec::new();
    }
    b.iter()
        .enumerate()
        .filter(|(_, v)| v.norm() > ZERO_RELATIVE * max)
        .map(|(i, _)| i)
        .collect()
}

/// Minimiser of `J(b)` with `b_i = 0` for every `i` outside `support`.
pub fn polish(form: &QuadraticForm, support: &[usize]) -> Result<DVector<C64>> {
    let n = form.dim();
    if let Some(&bad) = support.iter().find(|&&i| i >= n) {
        return Err(KmdError::InvalidArgument(format!("support index {bad} out of range for {n} modes")));
    }
    let mut b = DVector::zeros(n);
    if support.is_empty() {
        return Ok(b);
    }
    let p_ss = form.p.select_rows(support.iter()).select_columns(support.iter());
    let q_s = form.q.select_rows(support.iter());
    let (b_s, info) = linalg::hermitian_solve(&p_ss, &q_s);
    if info.min_norm {
        warn!(
            "restricted system on {} modes is singular ({:.3e}); using the minimum-norm solution",
            support.len(),
            info.condition
        );
    }
    for (k, &i) in support.iter().enumerate() {
        b[i] = b_s[k];
    }
    Ok(b)
}

/// `100·sqrt(cost / s)`.
pub fn performance_loss(cost: f64, s: f64) -> Result<f64> {
    if !(s > 0.0) {
        return Err(KmdError::InvalidArgument("performance loss needs a nonzero data norm".into()));
    }
    if !(cost >= 0.0) {
        return Err(KmdError::InvalidArgument(format!("cost must be non-negative, got {cost}")));
    }
    Ok(100.0 * (cost / s).sqrt())
}

#[derive(Clone, Debug)]
pub struct SparseSolution {
    pub b_sparse: DVector<C64>,
    pub b_polished: DVector<C64>,
    pub support: Vec<usize>,
    pub gamma: f64,
    pub cardinality: usize,
    /// `J(b_polished)`, the squared Frobenius residual.
    pub cost: f64,
    pub loss_percent: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ParetoPoint {
    pub gamma: f64,
    pub cardinality: usize,
    pub cost: f64,
    pub loss_percent: f64,
}

impl From<&SparseSolution> for ParetoPoint {
    fn from(s: &SparseSolution) -> Self {
        Self {
            gamma: s.gamma,
            cardinality: s.cardinality,
            cost: s.cost,
            loss_percent: s.loss_percent,
        }
    }
}

fn finish(form: &QuadraticForm, gamma: f64, outcome: AdmmOutcome) -> Result<SparseSolution> {
    let candidate = support_of(&outcome.b);
    let b_polished = polish(form, &candidate)?;
    let support: Vec<usize> = candidate.into_iter().filter(|&i| b_polished[i] != ZERO).collect();
    let cost = form.value(&b_polished).max(0.0);
    let loss_percent = if form.s > 0.0 { performance_loss(cost, form.s)? } else { 0.0 };
    Ok(SparseSolution {
        b_sparse: outcome.b,
        cardinality: support.len(),
        b_polished,
        support,
        gamma,
        cost,
        loss_percent,
        iterations: outcome.iterations,
        converged: outcome.converged,
    })
}

/// Solve and polish for a single `γ`.
pub fn sparse_solution(form: &QuadraticForm, gamma: f64, params: AdmmParams) -> Result<SparseSolution> {
    let outcome = admm_solve(form, gamma, params)?;
    finish(form, gamma, outcome)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SweepParams {
    pub admm: AdmmParams,
    /// Seed each `γ` with the previous solution.
    pub warm_start: bool,
}

impl Default for SweepParams {
    fn default() -> Self {
        Self {
            admm: AdmmParams::default(),
            warm_start: true,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Sweep {
    pub points: Vec<ParetoPoint>,
    pub solutions: Vec<SparseSolution>,
}

/// `count` geometrically spaced values from `min` to `max`, both included.
pub fn log_grid(min: f64, max: f64, count: usize) -> Result<Vec<f64>> {
    if count == 0 {
        return Err(KmdError::InvalidArgument("gamma grid needs at least one point".into()));
    }
    if !(min <= max) || min < 0.0 || !max.is_finite() {
        return Err(KmdError::InvalidArgument(format!("bad gamma range [{min}, {max}]")));
    }
    if count == 1 {
        return Ok(vec![min]);
    }
    if !(min > 0.0) {
        return Err(KmdError::InvalidArgument("log-spaced grids need gamma_min > 0".into()));
    }
    let ratio = max / min;
    let last = (count - 1) as f64;
    let mut grid: Vec<f64> = (0..count).map(|i| min * ratio.powf(i as f64 / last)).collect();
    grid[0] = min;
    grid[count - 1] = max;
    Ok(grid)
}

/// Solve and polish for every `γ`, returned in ascending `γ` order.
/// Non-convergence at any point is flagged, never fatal.
pub fn gamma_sweep(form: &QuadraticForm, gammas: &[f64], params: SweepParams) -> Result<Sweep> {
    if gammas.is_empty() {
        return Err(KmdError::InvalidArgument("empty gamma grid".into()));
    }
    if let Some(g) = gammas.iter().find(|g| !(**g >= 0.0) || !g.is_finite()) {
        return Err(KmdError::InvalidArgument(format!("gamma must be finite and ≥ 0, got {g}")));
    }
    let mut sorted = gammas.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite gammas"));
    let solver = AdmmSolver::new(form, params.admm)?;

    let solutions = if params.warm_start {
        let mut out = Vec::with_capacity(sorted.len());
        let mut warm: Option<AdmmState> = None;
        for &g in &sorted {
            let outcome = solver.solve(g, warm.as_ref())?;
            warm = Some(outcome.state.clone());
            out.push(finish(form, g, outcome)?);
        }
        out
    } else {
        independent_points(&solver, form, &sorted)?
    };
    let points = solutions.iter().map(ParetoPoint::from).collect();
    Ok(Sweep { points, solutions })
}

#[cfg(feature = "parallel")]
fn independent_points(solver: &AdmmSolver<'_>, form: &QuadraticForm, gammas: &[f64]) -> Result<Vec<SparseSolution>> {
    use rayon::prelude::*;
    gammas
        .par_iter()
        .map(|&g| finish(form, g, solver.solve(g, None)?))
        .collect()
}

#[cfg(not(feature = "parallel"))]
fn independent_points(solver: &AdmmSolver<'_>, form: &QuadraticForm, gammas: &[f64]) -> Result<Vec<SparseSolution>> {
    gammas
        .iter()
        .map(|&g| finish(form, g, solver.solve(g, None)?))
        .collect()
}

/// Restrict a decomposition to the support of a sparse solution, with the
/// polished amplitudes, sorted by descending `|b|`.
pub fn select_modes(result: &DecompositionResult, solution: &SparseSolution) -> Result<DecompositionResult> {
    if solution.b_polished.len() != result.rank() {
        return Err(KmdError::Dimension(format!(
            "solution has {} amplitudes but the decomposition has rank {}",
            solution.b_polished.len(),
            result.rank()
        )));
    }
    if solution.support.is_empty() {
        warn!("empty support at gamma = {}; the reduced model has no modes", solution.gamma);
    }
    let mut out = result.clone();
    out.amplitudes = Some(solution.b_polished.iter().cloned().collect());
    out.permute(&solution.support);
    out.method = Method::Spdmd;
    out.sort_by_amplitude();
    Ok(out)
}
