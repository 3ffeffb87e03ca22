//! Koopman mode decomposition of gridded snapshot data.
//!
//! The pipeline is: load and mask snapshots ([`snapshots`]), decompose them
//! with exact DMD ([`dmd`]) or companion DMD ([`cdmd`]), select a sparse set of
//! modes by ℓ1-penalised amplitude fitting ([`spdmd`]), and evaluate the
//! resulting reduced-order model ([`rom`]).

pub mod cdmd;
pub mod dmd;
pub mod error;
pub mod io;
pub mod linalg;
pub mod rom;
pub mod snapshots;
pub mod spdmd;
pub mod synthetic;

pub use cdmd::{companion_dmd, companion_model, unit_circle_deviation, CompanionModel};
pub use dmd::{
    exact_dmd, mode_stats, optimal_amplitudes, truncated_svd, vandermonde, DecompositionResult, Method, ModeStats,
    ModeStyle, SvdFactors, Vandermonde,
};
pub use error::{KmdError, Result};
pub use linalg::C64;
pub use rom::{KoopmanTuple, ReducedOrderModel};
pub use snapshots::{
    apply_mask, build_pairs, load_matrix, stack_cycles, subtract_mean, GridShape, InputFormat, LoadOptions,
    SnapshotMatrix, SnapshotPair,
};
pub use spdmd::{
    admm_solve, gamma_sweep, log_grid, performance_loss, polish, quadratic_form, select_modes, AdmmParams,
    ParetoPoint, QuadraticForm, SparseSolution, SweepParams,
};
