//! Snapshot matrices: loading, masking, cycle stacking and time-shifted pairs.
//!
//! Rows are spatial points and columns are time steps. A matrix may carry the
//! grid it was sampled on and the sea mask that selected its rows, so modes can
//! later be mapped back onto the grid.

use std::path::Path;

use log::warn;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{KmdError, Result};
use crate::io;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridShape {
    pub n_lat: usize,
    pub n_lon: usize,
}

impl GridShape {
    pub fn new(n_lat: usize, n_lon: usize) -> Self {
        Self { n_lat, n_lon }
    }

    pub fn cells(&self) -> usize {
        self.n_lat * self.n_lon
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InputFormat {
    Csv,
    RawF64,
}

#[derive(Clone, Debug)]
pub struct LoadOptions {
    pub format: InputFormat,
    pub grid: Option<GridShape>,
    /// Skip the first CSV line.
    pub header: bool,
    /// The file stores time along rows instead of columns.
    pub transpose: bool,
    pub dt_label: String,
}

impl Default for LoadOptions {
    fn default() -> Self {
        Self {
            format: InputFormat::Csv,
            grid: None,
            header: false,
            transpose: false,
            dt_label: "step".to_string(),
        }
    }
}

/// Real `p × N` snapshot data with optional grid metadata.
#[derive(Clone, Debug, PartialEq)]
pub struct SnapshotMatrix {
    data: DMatrix<f64>,
    grid: Option<GridShape>,
    mask: Option<Vec<bool>>,
    cycle: usize,
    dt_label: String,
}

impl SnapshotMatrix {
    pub fn new(data: DMatrix<f64>, dt_label: impl Into<String>) -> Self {
        Self {
            data,
            grid: None,
            mask: None,
            cycle: 1,
            dt_label: dt_label.into(),
        }
    }

    pub fn with_grid(mut self, grid: GridShape) -> Result<Self> {
        let base = self.data.nrows() / self.cycle;
        if grid.cells() < base {
            return Err(KmdError::Dimension(format!(
                "grid {}x{} has fewer cells than the {} spatial points",
                grid.n_lat, grid.n_lon, base
            )));
        }
        if let Some(mask) = &self.mask {
            if mask.len() != grid.cells() {
                return Err(KmdError::Mask(format!(
                    "stored mask has {} entries but grid has {} cells",
                    mask.len(),
                    grid.cells()
                )));
            }
        }
        self.grid = Some(grid);
        Ok(self)
    }

    pub fn with_dt_label(mut self, label: impl Into<String>) -> Self {
        self.dt_label = label.into();
        self
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn into_data(self) -> DMatrix<f64> {
        self.data
    }

    pub fn nrows(&self) -> usize {
        self.data.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.data.ncols()
    }

    pub fn grid(&self) -> Option<GridShape> {
        self.grid
    }

    pub fn mask(&self) -> Option<&[bool]> {
        self.mask.as_deref()
    }

    /// Number of raw snapshots stacked into each column.
    pub fn cycle(&self) -> usize {
        self.cycle
    }

    pub fn dt_label(&self) -> &str {
        &self.dt_label
    }

    /// Rows per intra-cycle slot.
    pub fn base_rows(&self) -> usize {
        self.data.nrows() / self.cycle
    }

    /// First non-finite entry, scanning column by column.
    pub fn ensure_finite(&self) -> Result<()> {
        for (j, col) in self.data.column_iter().enumerate() {
            if let Some(i) = col.iter().position(|v| !v.is_finite()) {
                return Err(KmdError::NonFinite { row: i, col: j });
            }
        }
        Ok(())
    }
}

/// Time-shifted copies: `y` holds columns `0..N-1`, `y_plus` columns `1..N`.
#[derive(Clone, Debug, PartialEq)]
pub struct SnapshotPair {
    pub y: DMatrix<f64>,
    pub y_plus: DMatrix<f64>,
    pub dt_label: String,
}

impl SnapshotPair {
    pub fn ncols(&self) -> usize {
        self.y.ncols()
    }
}

pub fn load_matrix(path: &Path, opts: &LoadOptions) -> Result<SnapshotMatrix> {
    let mut data = match opts.format {
        InputFormat::Csv => io::read_csv(path, opts.header)?,
        InputFormat::RawF64 => io::read_raw(path)?,
    };
    if opts.transpose {
        data = data.transpose();
    }
    if data.ncols() < 2 {
        return Err(KmdError::TooFewSnapshots {
            needed: 2,
            got: data.ncols(),
        });
    }
    let x = SnapshotMatrix::new(data, opts.dt_label.clone());
    match opts.grid {
        Some(grid) => x.with_grid(grid),
        None => Ok(x),
    }
}

/// Keep only the rows flagged `true` in `mask`, preserving their order.
///
/// The mask spans the full grid (row-major over latitude, longitude). When the
/// matrix was already masked, the new mask must select a subset of the stored
/// one.
pub fn apply_mask(x: &SnapshotMatrix, mask: &[bool]) -> Result<SnapshotMatrix> {
    if x.cycle != 1 {
        return Err(KmdError::Mask("masks must be applied before cycle stacking".into()));
    }
    let cells = x.grid.map(|g| g.cells()).unwrap_or(x.nrows());
    if mask.len() != cells {
        return Err(KmdError::Mask(format!(
            "mask has {} entries but the grid has {} cells",
            mask.len(),
            cells
        )));
    }
    let kept = mask.iter().filter(|&&m| m).count();
    if kept == 0 {
        return Err(KmdError::Mask("mask retains no points".into()));
    }

    // grid cell index of every current row
    let row_cells: Vec<usize> = match &x.mask {
        Some(stored) => stored.iter().enumerate().filter(|(_, &m)| m).map(|(i, _)| i).collect(),
        None => {
            if x.nrows() != cells {
                return Err(KmdError::Mask(format!(
                    "matrix has {} rows but the unmasked grid has {} cells",
                    x.nrows(),
                    cells
                )));
            }
            (0..cells).collect()
        }
    };
    if let Some(stored) = &x.mask {
        if let Some(i) = (0..cells).find(|&i| mask[i] && !stored[i]) {
            return Err(KmdError::Mask(format!("cell {i} is retained by the new mask but was already removed")));
        }
    }

    let rows: Vec<usize> = row_cells
        .iter()
        .enumerate()
        .filter(|(_, &cell)| mask[cell])
        .map(|(r, _)| r)
        .collect();
    let data = x.data.select_rows(rows.iter());
    Ok(SnapshotMatrix {
        data,
        grid: Some(x.grid.unwrap_or(GridShape::new(cells, 1))),
        mask: Some(mask.to_vec()),
        cycle: 1,
        dt_label: x.dt_label.clone(),
    })
}

/// Stack `c` consecutive snapshots into one column of height `p·c`.
///
/// Trailing columns that do not fill a whole cycle are dropped.
pub fn stack_cycles(x: &SnapshotMatrix, c: usize) -> Result<SnapshotMatrix> {
    let (p, n) = x.data.shape();
    if c == 0 {
        return Err(KmdError::InvalidArgument("cycle length must be at least 1".into()));
    }
    if c > n {
        return Err(KmdError::InvalidArgument(format!(
            "cycle length {c} exceeds the {n} available snapshots"
        )));
    }
    if c == 1 {
        return Ok(x.clone());
    }
    let cols = n / c;
    if cols * c != n {
        warn!("dropping {} trailing snapshot(s) that do not fill a cycle of {c}", n - cols * c);
    }
    let mut data = DMatrix::zeros(p * c, cols);
    for j in 0..cols {
        for slot in 0..c {
            data.view_mut((slot * p, j), (p, 1))
                .copy_from(&x.data.column(j * c + slot));
        }
    }
    Ok(SnapshotMatrix {
        data,
        grid: x.grid,
        mask: x.mask.clone(),
        cycle: x.cycle * c,
        dt_label: format!("{c}-{}", x.dt_label),
    })
}

/// Inverse of [`stack_cycles`]: split every column back into `c` snapshots.
pub fn unstack_cycles(x: &SnapshotMatrix, c: usize) -> Result<SnapshotMatrix> {
    let (rows, cols) = x.data.shape();
    if c == 0 || rows % c != 0 || x.cycle % c != 0 {
        return Err(KmdError::InvalidArgument(format!(
            "cannot unstack {rows} rows (cycle {}) by {c}",
            x.cycle
        )));
    }
    let p = rows / c;
    let mut data = DMatrix::zeros(p, cols * c);
    for j in 0..cols {
        for slot in 0..c {
            data.column_mut(j * c + slot)
                .copy_from(&x.data.view((slot * p, j), (p, 1)));
        }
    }
    let label = x
        .dt_label
        .strip_prefix(&format!("{c}-"))
        .unwrap_or(&x.dt_label)
        .to_string();
    Ok(SnapshotMatrix {
        data,
        grid: x.grid,
        mask: x.mask.clone(),
        cycle: x.cycle / c,
        dt_label: label,
    })
}

pub fn build_pairs(x: &SnapshotMatrix) -> Result<SnapshotPair> {
    let n = x.ncols();
    if n < 2 {
        return Err(KmdError::TooFewSnapshots { needed: 2, got: n });
    }
    x.ensure_finite()?;
    Ok(SnapshotPair {
        y: x.data.columns(0, n - 1).into_owned(),
        y_plus: x.data.columns(1, n - 1).into_owned(),
        dt_label: x.dt_label.clone(),
    })
}

/// Remove each row's temporal mean. Returns the centred matrix and the means.
pub fn subtract_mean(x: &SnapshotMatrix) -> (SnapshotMatrix, DVector<f64>) {
    let mean = x.data.column_mean();
    let mut centred = x.clone();
    for mut col in centred.data.column_iter_mut() {
        col -= &mean;
    }
    (centred, mean)
}

/// Add per-row means back onto every column.
pub fn add_mean(x: &DMatrix<f64>, mean: &DVector<f64>) -> DMatrix<f64> {
    let mut out = x.clone();
    for mut col in out.column_iter_mut() {
        col += mean;
    }
    out
}
