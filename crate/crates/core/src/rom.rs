//! Reduced-order models built from Koopman tuples.
//!
//! A model is a list of `(λ_j, φ_j, b_j)` triples; the snapshot at step `k` is
//! approximated by `Re Σ_j φ_j λ_j^k b_j`. The amplitude `b_j` stands in for
//! the eigenfunction value at the initial state.

use std::ops::Range;

use log::warn;
use nalgebra::{DMatrix, DVector};

use crate::dmd::{mode_stats, DecompositionResult};
use crate::error::{KmdError, Result};
use crate::linalg::C64;
use crate::snapshots::GridShape;

/// Eigenvalues closer than this (relative) count as conjugate partners.
pub const CONJUGATE_TOLERANCE: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq)]
pub struct KoopmanTuple {
    pub eigenvalue: C64,
    pub mode: DVector<C64>,
    pub amplitude: C64,
    pub magnitude: f64,
    pub e_folding: f64,
    pub period: f64,
    pub original_index: usize,
}

impl KoopmanTuple {
    pub fn new(eigenvalue: C64, mode: DVector<C64>, amplitude: C64, original_index: usize) -> Result<Self> {
        let stats = mode_stats(eigenvalue)?;
        Ok(Self {
            eigenvalue,
            mode,
            amplitude,
            magnitude: stats.magnitude,
            e_folding: stats.e_folding,
            period: stats.period,
            original_index,
        })
    }
}

#[derive(Clone, Debug)]
pub struct ReducedOrderModel {
    tuples: Vec<KoopmanTuple>,
    spatial_dim: usize,
    dt_label: String,
}

/// A reconstructed snapshot and `‖Im‖/‖Re‖` of the discarded imaginary part.
#[derive(Clone, Debug)]
pub struct Reconstruction {
    pub values: DVector<f64>,
    pub imag_ratio: f64,
}

#[derive(Clone, Debug)]
pub struct TemporalDynamics {
    /// Position (in the model's tuple list) of the tuple behind each row.
    pub tuple_rows: Vec<usize>,
    pub times: Vec<usize>,
    pub data: DMatrix<f64>,
}

#[derive(Clone, Debug)]
pub struct Forecast {
    pub data: DMatrix<f64>,
    /// Some value overflowed and was clamped to `±f64::MAX`.
    pub saturated: bool,
}

impl ReducedOrderModel {
    /// Tuples are re-sorted by descending `|b|`, ties by ascending original index.
    pub fn new(mut tuples: Vec<KoopmanTuple>, dt_label: impl Into<String>) -> Result<Self> {
        let Some(first) = tuples.first() else {
            return Err(KmdError::InvalidArgument("a reduced-order model needs at least one tuple".into()));
        };
        let p = first.mode.len();
        if let Some(t) = tuples.iter().find(|t| t.mode.len() != p) {
            return Err(KmdError::Dimension(format!(
                "mode {} has length {} but others have {p}",
                t.original_index,
                t.mode.len()
            )));
        }
        tuples.sort_by(|a, b| {
            b.amplitude
                .norm()
                .partial_cmp(&a.amplitude.norm())
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.original_index.cmp(&b.original_index))
        });
        Ok(Self {
            tuples,
            spatial_dim: p,
            dt_label: dt_label.into(),
        })
    }

    pub fn from_result(result: &DecompositionResult) -> Result<Self> {
        let amps = result
            .amplitudes
            .as_ref()
            .ok_or_else(|| KmdError::InvalidArgument("decomposition has no amplitudes".into()))?;
        let tuples = (0..result.rank())
            .map(|j| {
                KoopmanTuple::new(
                    result.eigenvalues[j],
                    result.modes.column(j).into_owned(),
                    amps[j],
                    result.original_index[j],
                )
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(tuples, result.dt_label.clone())
    }

    pub fn tuples(&self) -> &[KoopmanTuple] {
        &self.tuples
    }

    pub fn len(&self) -> usize {
        self.tuples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tuples.is_empty()
    }

    pub fn spatial_dim(&self) -> usize {
        self.spatial_dim
    }

    pub fn dt_label(&self) -> &str {
        &self.dt_label
    }

    /// Keep the first `m` tuples (largest amplitudes).
    pub fn truncated(&self, m: usize) -> Result<Self> {
        if m == 0 {
            return Err(KmdError::InvalidArgument("cannot truncate to zero tuples".into()));
        }
        Self::new(self.tuples[..m.min(self.len())].to_vec(), self.dt_label.clone())
    }

    fn complex_snapshot(&self, k: usize) -> DVector<C64> {
        let mut acc = DVector::<C64>::zeros(self.spatial_dim);
        let exp = i32::try_from(k).ok();
        for t in &self.tuples {
            let power = match exp {
                Some(e) => t.eigenvalue.powi(e),
                None => t.eigenvalue.powf(k as f64),
            };
            acc.axpy(power * t.amplitude, &t.mode, C64::new(1.0, 0.0));
        }
        acc
    }

    pub fn reconstruct(&self, k: usize) -> Reconstruction {
        let z = self.complex_snapshot(k);
        let values = z.map(|v| v.re);
        let im = z.map(|v| v.im).norm();
        let re = values.norm();
        let imag_ratio = if im == 0.0 {
            0.0
        } else if re == 0.0 {
            f64::INFINITY
        } else {
            im / re
        };
        Reconstruction { values, imag_ratio }
    }

    /// Position of each tuple's conjugate partner, if any.
    pub fn conjugate_partners(&self) -> Vec<Option<usize>> {
        let n = self.len();
        let mut partner = vec![None; n];
        for i in 0..n {
            let li = self.tuples[i].eigenvalue;
            if is_real(li) || partner[i].is_some() {
                continue;
            }
            let tol = CONJUGATE_TOLERANCE * li.norm().max(1.0);
            let found = (0..n).filter(|&j| j != i && partner[j].is_none()).find(|&j| {
                let lj = self.tuples[j].eigenvalue;
                !is_real(lj) && (lj - li.conj()).norm() <= tol
            });
            if let Some(j) = found {
                partner[i] = Some(j);
                partner[j] = Some(i);
            }
        }
        partner
    }

    /// Rows of `Re(λ_j^t b_j)`. With `collapse_pairs`, each conjugate pair is
    /// represented once by its combined contribution `2 Re(λ^t b)`.
    pub fn temporal_dynamics(&self, t_range: Range<usize>, collapse_pairs: bool) -> Result<TemporalDynamics> {
        if t_range.is_empty() {
            return Err(KmdError::InvalidArgument("empty time range".into()));
        }
        let partners = self.conjugate_partners();
        let rows: Vec<(usize, f64)> = (0..self.len())
            .filter_map(|j| match (collapse_pairs, partners[j]) {
                (true, Some(other)) if other < j => None,
                (true, Some(_)) => Some((j, 2.0)),
                _ => Some((j, 1.0)),
            })
            .collect();
        let times: Vec<usize> = t_range.collect();
        let data = DMatrix::from_fn(rows.len(), times.len(), |r, c| {
            let (j, factor) = rows[r];
            let t = &self.tuples[j];
            factor * (t.eigenvalue.powi(times[c] as i32) * t.amplitude).re
        });
        Ok(TemporalDynamics {
            tuple_rows: rows.into_iter().map(|(j, _)| j).collect(),
            times,
            data,
        })
    }

    /// Snapshots `n_train .. n_train + horizon`, one per column.
    pub fn forecast(&self, horizon: usize, n_train: usize) -> Result<Forecast> {
        if horizon == 0 {
            return Err(KmdError::InvalidArgument("forecast horizon must be at least 1".into()));
        }
        let mut data = DMatrix::zeros(self.spatial_dim, horizon);
        let mut saturated = false;
        for h in 0..horizon {
            let rec = self.reconstruct(n_train + h);
            for (i, v) in rec.values.iter().enumerate() {
                data[(i, h)] = if v.is_finite() {
                    *v
                } else {
                    saturated = true;
                    if *v < 0.0 {
                        -f64::MAX
                    } else {
                        f64::MAX
                    }
                };
            }
        }
        if saturated {
            warn!("forecast overflowed for growing modes; values clamped to ±f64::MAX");
        }
        Ok(Forecast { data, saturated })
    }
}

fn is_real(l: C64) -> bool {
    l.im.abs() <= CONJUGATE_TOLERANCE * l.norm().max(1.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GridComponent {
    Real,
    Imag,
    Abs,
}

impl GridComponent {
    fn apply(self, v: C64) -> f64 {
        match self {
            GridComponent::Real => v.re,
            GridComponent::Imag => v.im,
            GridComponent::Abs => v.norm(),
        }
    }
}

/// How stacked (multi-slot) modes map to grids.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SlotLayout {
    /// One grid per intra-cycle slot.
    PerSlot,
    /// Average over slots.
    Mean,
}

/// Map a mode vector onto `(n_lat, n_lon)` grids, `NaN` at masked cells.
///
/// `cycle` is the number of stacked snapshots per column; the mode length
/// must equal `cycle` times the number of retained cells.
pub fn mode_grid(
    mode: &DVector<C64>,
    grid: GridShape,
    mask: Option<&[bool]>,
    cycle: usize,
    component: GridComponent,
    layout: SlotLayout,
) -> Result<Vec<DMatrix<f64>>> {
    let cells: Vec<usize> = match mask {
        Some(m) => {
            if m.len() != grid.cells() {
                return Err(KmdError::Mask(format!("mask has {} entries, grid has {} cells", m.len(), grid.cells())));
            }
            m.iter().enumerate().filter(|(_, &keep)| keep).map(|(i, _)| i).collect()
        }
        None => (0..grid.cells()).collect(),
    };
    let base = cells.len();
    if cycle == 0 || mode.len() != base * cycle {
        return Err(KmdError::Dimension(format!(
            "mode of length {} does not fit {} cells x {cycle} slots",
            mode.len(),
            base
        )));
    }
    let slot_grid = |slot: usize| {
        let mut g = DMatrix::from_element(grid.n_lat, grid.n_lon, f64::NAN);
        for (r, &cell) in cells.iter().enumerate() {
            g[(cell / grid.n_lon, cell % grid.n_lon)] = component.apply(mode[slot * base + r]);
        }
        g
    };
    let grids: Vec<DMatrix<f64>> = (0..cycle).map(slot_grid).collect();
    match layout {
        SlotLayout::PerSlot => Ok(grids),
        SlotLayout::Mean => {
            let mut mean = grids[0].clone();
            for g in &grids[1..] {
                mean += g;
            }
            Ok(vec![mean / cycle as f64])
        }
    }
}

/// Element-wise magnitude grids of one tuple's mode.
pub fn mode_magnitude_grid(
    tuple: &KoopmanTuple,
    grid: GridShape,
    mask: Option<&[bool]>,
    cycle: usize,
    layout: SlotLayout,
) -> Result<Vec<DMatrix<f64>>> {
    mode_grid(&tuple.mode, grid, mask, cycle, GridComponent::Abs, layout)
}
