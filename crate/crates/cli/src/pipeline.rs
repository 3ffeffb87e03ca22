//! Loading and preprocessing shared by every subcommand.

use std::path::Path;

use kmd_core::io::read_mask;
use kmd_core::snapshots::add_mean;
use kmd_core::{apply_mask, load_matrix, stack_cycles, subtract_mean, GridShape, SnapshotMatrix};
use log::info;
use nalgebra::{DMatrix, DVector};

use crate::config::InputConfig;
use crate::error::{CliError, CliResult};

pub struct Prepared {
    /// Masked, stacked and (optionally) centred snapshots.
    pub snapshots: SnapshotMatrix,
    /// Row means removed after stacking.
    pub mean: Option<DVector<f64>>,
    /// Shape of the file contents before masking and stacking.
    pub raw_shape: (usize, usize),
}

impl Prepared {
    /// Grid used to export modes; a column of points when none was given.
    pub fn grid(&self) -> GridShape {
        self.snapshots
            .grid()
            .unwrap_or(GridShape::new(self.snapshots.base_rows(), 1))
    }

    /// The snapshots with the removed mean added back.
    pub fn uncentred(&self) -> DMatrix<f64> {
        match &self.mean {
            Some(m) => add_mean(self.snapshots.data(), m),
            None => self.snapshots.data().clone(),
        }
    }
}

pub fn prepare(cfg: &InputConfig) -> CliResult<Prepared> {
    let path = Path::new(&cfg.path);
    let mut x = load_matrix(path, &cfg.load_options())?;
    let raw_shape = (x.nrows(), x.ncols());
    info!("loaded {} x {} snapshots from {}", raw_shape.0, raw_shape.1, cfg.path);
    if let Some(mask_path) = &cfg.mask {
        let mask = read_mask(Path::new(mask_path))?;
        x = apply_mask(&x, &mask)?;
        info!("mask keeps {} of {} points", x.nrows(), mask.len());
    } else if let Some(grid) = cfg.grid {
        if grid.cells() != x.nrows() {
            return Err(CliError::Usage(format!(
                "grid {}x{} has {} cells but the data has {} rows; pass --mask for partial grids",
                grid.n_lat,
                grid.n_lon,
                grid.cells(),
                x.nrows()
            )));
        }
    }
    if cfg.cycle > 1 {
        x = stack_cycles(&x, cfg.cycle)?;
    }
    let mean = if cfg.subtract_mean {
        let (centred, mean) = subtract_mean(&x);
        x = centred;
        Some(mean)
    } else {
        None
    };
    Ok(Prepared {
        snapshots: x,
        mean,
        raw_shape,
    })
}
