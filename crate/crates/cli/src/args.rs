//! Command-line flags.

use std::path::PathBuf;

use clap::{ArgAction, Args, Parser, Subcommand, ValueEnum};
use kmd_core::GridShape;

#[derive(Parser, Debug)]
#[command(name = "kmd", version, about = "Koopman mode decomposition of gridded snapshot data")]
pub struct Cli {
    /// More log output (-v info, -vv debug). Warnings are always shown.
    #[arg(short, long, action = ArgAction::Count, global = true)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Print the shape and value range of a snapshot file after masking and stacking.
    IngestInfo(InputArgs),
    /// Decompose snapshots and export eigenvalues, mode grids and temporal dynamics.
    Decompose(DecomposeArgs),
    /// Sweep the sparsity weight and export the accuracy/complexity trade-off.
    Sweep(SweepArgs),
    /// Rebuild snapshots and forecasts from a decompose run.
    Reconstruct(ReconstructArgs),
    /// Render a grid CSV as a grayscale PPM image.
    Heatmap(HeatmapArgs),
}

#[derive(Args, Debug, Clone)]
pub struct InputArgs {
    /// Snapshot file, rows = spatial points, columns = time steps.
    #[arg(short, long)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value_t = FormatArg::Csv)]
    pub format: FormatArg,
    /// Grid shape as NLATxNLON, e.g. 10x60.
    #[arg(long, value_parser = parse_grid)]
    pub grid: Option<GridShape>,
    /// CSV of 0/1 flags over the grid, row-major; 1 keeps the point.
    #[arg(long)]
    pub mask: Option<PathBuf>,
    /// Stack this many consecutive snapshots into one column.
    #[arg(long, default_value_t = 1)]
    pub cycle: usize,
    /// Skip the first line of a CSV input.
    #[arg(long)]
    pub header: bool,
    /// The file stores time along rows.
    #[arg(long)]
    pub transpose: bool,
    /// Remove each row's temporal mean (after stacking) before decomposing.
    #[arg(long)]
    pub subtract_mean: bool,
    /// Name of one time step, e.g. month.
    #[arg(long, default_value = "step")]
    pub dt_label: String,
}

#[derive(Args, Debug, Clone)]
pub struct SolverArgs {
    #[arg(long, default_value_t = 1.0)]
    pub rho: f64,
    #[arg(long, default_value_t = 1e-6)]
    pub eps_abs: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub eps_rel: f64,
    #[arg(long, default_value_t = 10_000)]
    pub max_iter: usize,
    /// Solve every sparsity weight from scratch (in parallel).
    #[arg(long)]
    pub no_warm_start: bool,
}

#[derive(Args, Debug, Clone)]
pub struct DecomposeArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, value_enum, default_value_t = MethodArg::Dmd)]
    pub method: MethodArg,
    /// Truncation rank; defaults to the numerical rank.
    #[arg(long)]
    pub rank: Option<usize>,
    #[arg(long, value_enum, default_value_t = ModeStyleArg::Exact)]
    pub mode_style: ModeStyleArg,
    /// Sparsity weight for --method spdmd.
    #[arg(long)]
    pub gamma: Option<f64>,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Show each conjugate pair once in temporal.csv.
    #[arg(long)]
    pub pair_collapse: bool,
    /// Mode grids for stacked data: one per slot, or their mean.
    #[arg(long, value_enum, default_value_t = SlotLayoutArg::PerSlot)]
    pub slot_layout: SlotLayoutArg,
    #[arg(short, long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Clone)]
pub struct SweepArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, value_enum, default_value_t = MethodArg::Spdmd)]
    pub method: MethodArg,
    #[arg(long)]
    pub rank: Option<usize>,
    #[arg(long, value_enum, default_value_t = ModeStyleArg::Exact)]
    pub mode_style: ModeStyleArg,
    /// Smallest weight of a log-spaced grid.
    #[arg(long, requires_all = ["gamma_max", "gamma_count"], conflicts_with = "gamma")]
    pub gamma_min: Option<f64>,
    #[arg(long, requires = "gamma_min")]
    pub gamma_max: Option<f64>,
    #[arg(long, requires = "gamma_min")]
    pub gamma_count: Option<usize>,
    /// Explicit comma-separated weights instead of a log grid.
    #[arg(long, value_delimiter = ',')]
    pub gamma: Option<Vec<f64>>,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(short, long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Clone)]
pub struct ReconstructArgs {
    /// Output directory of a decompose run.
    #[arg(long)]
    pub model: PathBuf,
    /// Read snapshots from here instead of the path recorded in summary.json.
    #[arg(short, long)]
    pub input: Option<PathBuf>,
    /// Time indices to write as recon_<k>.csv, comma-separated.
    #[arg(short, long, value_delimiter = ',')]
    pub k: Vec<usize>,
    /// Number of steps to forecast past the training window.
    #[arg(long)]
    pub horizon: usize,
    /// Defaults to the model directory.
    #[arg(short, long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct HeatmapArgs {
    /// Grid CSV (NaN marks missing cells).
    #[arg(short, long)]
    pub input: PathBuf,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum FormatArg {
    Csv,
    RawF64,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum MethodArg {
    Dmd,
    Cdmd,
    Spdmd,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModeStyleArg {
    Exact,
    Projected,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum SlotLayoutArg {
    PerSlot,
    Mean,
}

pub fn parse_grid(s: &str) -> Result<GridShape, String> {
    let (a, b) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected NLATxNLON, got {s:?}"))?;
    let n_lat: usize = a.trim().parse().map_err(|_| format!("bad latitude count {a:?}"))?;
    let n_lon: usize = b.trim().parse().map_err(|_| format!("bad longitude count {b:?}"))?;
    if n_lat == 0 || n_lon == 0 {
        return Err("grid dimensions must be positive".into());
    }
    Ok(GridShape::new(n_lat, n_lon))
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn grid_parsing() {
        assert_eq!(parse_grid("10x60").unwrap(), GridShape::new(10, 60));
        assert_eq!(parse_grid("3X4").unwrap(), GridShape::new(3, 4));
        assert!(parse_grid("10").is_err());
        assert!(parse_grid("0x5").is_err());
        assert!(parse_grid("ax5").is_err());
    }

    #[test]
    fn command_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn gamma_list_parses() {
        let cli = Cli::try_parse_from(["kmd", "sweep", "-i", "x.csv", "--gamma", "0,1.5", "-o", "out"]).unwrap();
        let Command::Sweep(s) = cli.command else { panic!() };
        assert_eq!(s.gamma, Some(vec![0.0, 1.5]));
        assert!(Cli::try_parse_from(["kmd", "sweep", "-i", "x", "--gamma-min", "1", "-o", "o"]).is_err());
    }
}
