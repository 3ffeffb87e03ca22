//! Subcommand implementations.

use std::collections::BTreeMap;
use std::path::Path;

use kmd_core::io::{parse_f64, read_csv, read_raw, write_raw};
use kmd_core::linalg::to_complex;
use kmd_core::rom::{mode_grid, GridComponent, SlotLayout};
use kmd_core::spdmd::sparse_solution;
use kmd_core::{
    build_pairs, companion_dmd, exact_dmd, gamma_sweep, mode_stats, performance_loss, quadratic_form, select_modes,
    DecompositionResult, KoopmanTuple, ReducedOrderModel, SnapshotMatrix, C64,
};
use log::{info, warn};
use nalgebra::{DMatrix, DVector};
use serde_json::json;

use crate::args::{DecomposeArgs, HeatmapArgs, InputArgs, ReconstructArgs, SweepArgs};
use crate::config::{InputConfig, MethodConfig, RunConfig};
use crate::error::{CliError, CliResult};
use crate::output::{finite, num, write_file_atomic, write_json, write_matrix, write_table, Staging};
use crate::pipeline::{prepare, Prepared};
use crate::ppm;
use crate::summary::{version, DecomposeSummary, ReconReport, SweepSummary};

pub const EIGENVALUE_COLUMNS: [&str; 9] =
    ["index", "re", "im", "magnitude", "e_folding", "period", "amp_re", "amp_im", "amp_abs"];
pub const SWEEP_COLUMNS: [&str; 6] = ["gamma", "cardinality", "cost", "loss_percent", "iterations", "converged"];

fn header(cols: &[&str]) -> Vec<String> {
    cols.iter().map(|s| s.to_string()).collect()
}

pub fn ingest_info(args: &InputArgs) -> CliResult<()> {
    let cfg = InputConfig::from(args);
    if cfg.cycle == 0 {
        return Err(CliError::Usage("--cycle must be at least 1".into()));
    }
    if cfg.mask.is_some() && cfg.grid.is_none() {
        return Err(CliError::Usage("--mask needs --grid".into()));
    }
    let prepared = prepare(&cfg)?;
    let x = &prepared.snapshots;
    let finite_values = x.data().iter().cloned().filter(|v| v.is_finite());
    let (min, max) = finite_values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    let non_finite = x.data().iter().filter(|v| !v.is_finite()).count();
    let info = json!({
        "data_shape": {"rows": prepared.raw_shape.0, "cols": prepared.raw_shape.1},
        "model_shape": {"rows": x.nrows(), "cols": x.ncols()},
        "pair_columns": x.ncols().saturating_sub(1),
        "grid": prepared.grid(),
        "mask_retained": x.mask().map(|m| m.iter().filter(|&&k| k).count()),
        "cycle": x.cycle(),
        "dt_label": x.dt_label(),
        "non_finite": non_finite,
        "min": finite(min),
        "max": finite(max),
    });
    println!("{}", serde_json::to_string_pretty(&info).expect("json"));
    Ok(())
}

struct Decomposed {
    result: DecompositionResult,
    cost: f64,
    loss_percent: f64,
    s: f64,
    gamma: Option<f64>,
    iterations: Option<usize>,
    converged: Option<bool>,
}

/// `‖Y − Φ diag(b) Ξ‖_F²` by direct evaluation.
fn residual(y: &DMatrix<f64>, result: &DecompositionResult) -> f64 {
    let Some(b) = &result.amplitudes else {
        return y.norm_squared();
    };
    if b.is_empty() {
        return y.norm_squared();
    }
    let scaled = &result.modes * DMatrix::from_diagonal(&DVector::from_column_slice(b));
    let model = scaled * result.vandermonde(y.ncols()).data;
    (to_complex(y) - model).norm_squared()
}

fn loss_of(cost: f64, s: f64) -> CliResult<f64> {
    if s > 0.0 {
        Ok(performance_loss(cost, s)?)
    } else {
        Ok(0.0)
    }
}

fn run_decomposition(cfg: &RunConfig, x: &SnapshotMatrix) -> CliResult<Decomposed> {
    match cfg.method {
        MethodConfig::Dmd => {
            let pair = build_pairs(x)?;
            let result = exact_dmd(&pair, cfg.rank, cfg.mode_style)?.fit_amplitudes(&pair.y)?;
            let cost = residual(&pair.y, &result);
            let s = pair.y.norm_squared();
            Ok(Decomposed {
                result,
                cost,
                loss_percent: loss_of(cost, s)?,
                s,
                gamma: None,
                iterations: None,
                converged: None,
            })
        }
        MethodConfig::Cdmd => {
            if cfg.rank.is_some() {
                warn!("--rank is ignored by the companion method");
            }
            let result = companion_dmd(x)?;
            let k = x.data().columns(0, x.ncols() - 1).into_owned();
            let cost = residual(&k, &result);
            let s = k.norm_squared();
            Ok(Decomposed {
                result,
                cost,
                loss_percent: loss_of(cost, s)?,
                s,
                gamma: None,
                iterations: None,
                converged: None,
            })
        }
        MethodConfig::Spdmd => {
            let gamma = cfg.gammas()?[0];
            let pair = build_pairs(x)?;
            let full = exact_dmd(&pair, cfg.rank, cfg.mode_style)?.fit_amplitudes(&pair.y)?;
            let form = quadratic_form(&pair.y, &full.modes, &full.vandermonde(pair.y.ncols()))?;
            let sol = sparse_solution(&form, gamma, cfg.solver.sweep_params().admm)?;
            info!("gamma {gamma}: {} of {} modes", sol.cardinality, full.rank());
            let result = select_modes(&full, &sol)?;
            Ok(Decomposed {
                result,
                cost: sol.cost,
                loss_percent: sol.loss_percent,
                s: form.s,
                gamma: Some(gamma),
                iterations: Some(sol.iterations),
                converged: Some(sol.converged),
            })
        }
    }
}

fn eigenvalue_rows(result: &DecompositionResult) -> CliResult<Vec<Vec<String>>> {
    let amps = result.amplitudes.as_ref().expect("amplitudes fitted");
    (0..result.rank())
        .map(|j| {
            let l = result.eigenvalues[j];
            let stats = mode_stats(l)?;
            let b = amps[j];
            Ok(vec![
                result.original_index[j].to_string(),
                num(l.re),
                num(l.im),
                num(stats.magnitude),
                num(stats.e_folding),
                num(stats.abs_period()),
                num(b.re),
                num(b.im),
                num(b.norm()),
            ])
        })
        .collect()
}

fn write_mode_grids(staging: &Staging, result: &DecompositionResult, prepared: &Prepared, slot_mean: bool) -> CliResult<()> {
    let x = &prepared.snapshots;
    let layout = if slot_mean { SlotLayout::Mean } else { SlotLayout::PerSlot };
    staging.dir("modes")?;
    for j in 0..result.rank() {
        let mode = result.modes.column(j).into_owned();
        let idx = result.original_index[j];
        for (component, name) in [
            (GridComponent::Real, "real"),
            (GridComponent::Imag, "imag"),
            (GridComponent::Abs, "abs"),
        ] {
            let grids = mode_grid(&mode, prepared.grid(), x.mask(), x.cycle(), component, layout)?;
            for (slot, g) in grids.iter().enumerate() {
                let file = if grids.len() == 1 {
                    format!("modes/{idx}_{name}.csv")
                } else {
                    format!("modes/{idx}_slot{slot}_{name}.csv")
                };
                write_matrix(&staging.path(&file)?, g)?;
            }
        }
    }
    Ok(())
}

fn write_temporal(staging: &Staging, result: &DecompositionResult, n: usize, collapse: bool) -> CliResult<()> {
    let path = staging.path("temporal.csv")?;
    if result.rank() == 0 {
        let rows: Vec<Vec<String>> = (0..n).map(|t| vec![t.to_string()]).collect();
        return write_table(&path, &header(&["t"]), &rows);
    }
    let model = ReducedOrderModel::from_result(result)?;
    let dynamics = model.temporal_dynamics(0..n, collapse)?;
    let mut head = vec!["t".to_string()];
    head.extend(
        dynamics
            .tuple_rows
            .iter()
            .map(|&r| format!("mode_{}", model.tuples()[r].original_index)),
    );
    let rows: Vec<Vec<String>> = dynamics
        .times
        .iter()
        .enumerate()
        .map(|(c, t)| {
            let mut row = vec![t.to_string()];
            row.extend(dynamics.data.column(c).iter().map(|&v| num(v)));
            row
        })
        .collect();
    write_table(&path, &head, &rows)
}

pub fn decompose(args: &DecomposeArgs) -> CliResult<()> {
    let cfg = RunConfig::from_decompose(args)?;
    let staging = Staging::new(&args.out)?;
    let prepared = prepare(&cfg.input)?;
    let x = &prepared.snapshots;
    let d = run_decomposition(&cfg, x)?;
    let result = &d.result;
    info!("{} modes, loss {:.4}%", result.rank(), d.loss_percent);

    write_table(
        &staging.path("eigenvalues.csv")?,
        &header(&EIGENVALUE_COLUMNS),
        &eigenvalue_rows(result)?,
    )?;
    write_mode_grids(&staging, result, &prepared, cfg.slot_mean)?;
    write_temporal(&staging, result, x.ncols(), cfg.pair_collapse)?;
    write_raw(&staging.path("modes_re.f64")?, &result.modes.map(|v| v.re))?;
    write_raw(&staging.path("modes_im.f64")?, &result.modes.map(|v| v.im))?;
    if let Some(mean) = &prepared.mean {
        write_matrix(&staging.path("mean.csv")?, &DMatrix::from_column_slice(mean.len(), 1, mean.as_slice()))?;
    }
    let summary = DecomposeSummary {
        toolkit_version: version(),
        command: "decompose".into(),
        method: result.method.as_str().into(),
        rank: result.rank(),
        data_shape: prepared.raw_shape.into(),
        model_shape: (x.nrows(), x.ncols()).into(),
        n_train: x.ncols(),
        dt_label: x.dt_label().into(),
        grid: prepared.grid(),
        cycle: x.cycle(),
        cost: d.cost,
        loss_percent: d.loss_percent,
        data_norm_squared: d.s,
        eigvec_condition: finite(result.eigvec_condition),
        gamma: d.gamma,
        admm_iterations: d.iterations,
        admm_converged: d.converged,
        config: cfg.clone(),
    };
    write_json(&staging.path("summary.json")?, &summary)?;
    staging.commit()
}

/// Loss-minimal row per cardinality, cardinality descending.
pub fn pareto_front(points: &[kmd_core::SparseSolution]) -> Vec<&kmd_core::SparseSolution> {
    let mut best: BTreeMap<usize, &kmd_core::SparseSolution> = BTreeMap::new();
    for p in points {
        best.entry(p.cardinality)
            .and_modify(|b| {
                if p.loss_percent < b.loss_percent {
                    *b = p;
                }
            })
            .or_insert(p);
    }
    best.into_values().rev().collect()
}

fn sweep_row(s: &kmd_core::SparseSolution) -> Vec<String> {
    vec![
        num(s.gamma),
        s.cardinality.to_string(),
        num(s.cost),
        num(s.loss_percent),
        s.iterations.to_string(),
        s.converged.to_string(),
    ]
}

pub fn sweep(args: &SweepArgs) -> CliResult<()> {
    let cfg = RunConfig::from_sweep(args)?;
    let gammas = cfg.gammas()?;
    let staging = Staging::new(&args.out)?;
    let prepared = prepare(&cfg.input)?;
    let x = &prepared.snapshots;
    let pair = build_pairs(x)?;
    let full = exact_dmd(&pair, cfg.rank, cfg.mode_style)?.fit_amplitudes(&pair.y)?;
    let form = quadratic_form(&pair.y, &full.modes, &full.vandermonde(pair.y.ncols()))?;
    let result = gamma_sweep(&form, &gammas, cfg.solver.sweep_params())?;
    let not_converged = result.solutions.iter().filter(|s| !s.converged).count();
    if not_converged > 0 {
        warn!("{not_converged} of {} sweep points did not converge", result.solutions.len());
    }

    let rows: Vec<Vec<String>> = result.solutions.iter().map(sweep_row).collect();
    write_table(&staging.path("sweep.csv")?, &header(&SWEEP_COLUMNS), &rows)?;
    let front: Vec<Vec<String>> = pareto_front(&result.solutions).into_iter().map(sweep_row).collect();
    write_table(&staging.path("pareto.csv")?, &header(&SWEEP_COLUMNS), &front)?;
    let summary = SweepSummary {
        toolkit_version: version(),
        command: "sweep".into(),
        method: "spdmd".into(),
        rank: full.rank(),
        data_shape: prepared.raw_shape.into(),
        model_shape: (x.nrows(), x.ncols()).into(),
        n_train: x.ncols(),
        dt_label: x.dt_label().into(),
        data_norm_squared: form.s,
        points: result.solutions.len(),
        not_converged,
        config: cfg.clone(),
    };
    write_json(&staging.path("summary.json")?, &summary)?;
    staging.commit()
}

fn read_model_dir(dir: &Path) -> CliResult<(DecomposeSummary, ReducedOrderModel, Option<DVector<f64>>)> {
    let need = |name: &str| {
        let p = dir.join(name);
        if p.exists() {
            Ok(p)
        } else {
            Err(CliError::Artifact(format!("missing artifact {}", p.display())))
        }
    };
    let summary_path = need("summary.json")?;
    let text = std::fs::read_to_string(&summary_path).map_err(|e| CliError::io(&summary_path, e))?;
    let summary: DecomposeSummary = serde_json::from_str(&text)
        .map_err(|e| CliError::Artifact(format!("{}: {e}", summary_path.display())))?;

    let eig_path = need("eigenvalues.csv")?;
    let eig_text = std::fs::read_to_string(&eig_path).map_err(|e| CliError::io(&eig_path, e))?;
    let mut lines = eig_text.lines();
    let head: Vec<&str> = lines.next().unwrap_or("").split(',').collect();
    let col = |name: &str| {
        head.iter()
            .position(|h| *h == name)
            .ok_or_else(|| CliError::Artifact(format!("{} has no {name} column", eig_path.display())))
    };
    let (ci, cre, cim, car, cai) = (col("index")?, col("re")?, col("im")?, col("amp_re")?, col("amp_im")?);
    let mut rows = Vec::new();
    for (n, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != head.len() {
            return Err(CliError::Artifact(format!("{} line {} is ragged", eig_path.display(), n + 2)));
        }
        let index: usize = f[ci]
            .parse()
            .map_err(|_| CliError::Artifact(format!("{} line {}: bad index", eig_path.display(), n + 2)))?;
        let get = |c: usize| parse_f64(f[c], n + 2, c + 1);
        rows.push((index, C64::new(get(cre)?, get(cim)?), C64::new(get(car)?, get(cai)?)));
    }

    let re = read_raw(&need("modes_re.f64")?)?;
    let im = read_raw(&need("modes_im.f64")?)?;
    if re.shape() != im.shape() || re.ncols() != rows.len() || rows.len() != summary.rank {
        return Err(CliError::Artifact(format!(
            "mode matrices ({}x{}, {}x{}) disagree with {} eigenvalues (rank {})",
            re.nrows(),
            re.ncols(),
            im.nrows(),
            im.ncols(),
            rows.len(),
            summary.rank
        )));
    }
    if rows.is_empty() {
        return Err(CliError::Artifact("the model has no modes to reconstruct from".into()));
    }
    let tuples = rows
        .iter()
        .enumerate()
        .map(|(j, &(index, l, b))| {
            let mode = DVector::from_fn(re.nrows(), |i, _| C64::new(re[(i, j)], im[(i, j)]));
            KoopmanTuple::new(l, mode, b, index)
        })
        .collect::<kmd_core::Result<Vec<_>>>()?;
    let model = ReducedOrderModel::new(tuples, summary.dt_label.clone())?;

    let mean = if summary.config.input.subtract_mean {
        let m = read_csv(&need("mean.csv")?, false)?;
        if m.ncols() != 1 || m.nrows() != model.spatial_dim() {
            return Err(CliError::Artifact(format!("mean.csv is {}x{}, expected {}x1", m.nrows(), m.ncols(), model.spatial_dim())));
        }
        Some(m.column(0).into_owned())
    } else {
        None
    };
    Ok((summary, model, mean))
}

pub fn reconstruct(args: &ReconstructArgs) -> CliResult<()> {
    if args.horizon == 0 {
        return Err(CliError::Usage("--horizon must be at least 1".into()));
    }
    let (summary, model, mean) = read_model_dir(&args.model)?;
    if let Some(&k) = args.k.iter().find(|&&k| k > i32::MAX as usize) {
        return Err(CliError::Usage(format!("time index {k} is too large")));
    }
    let mut input = summary.config.input.clone();
    if let Some(p) = &args.input {
        input.path = p.display().to_string();
    }
    let prepared = prepare(&input)?;
    let data = prepared.uncentred();
    if data.nrows() != model.spatial_dim() || data.ncols() != summary.n_train {
        return Err(CliError::Artifact(format!(
            "snapshots are {}x{} but the model expects {}x{}",
            data.nrows(),
            data.ncols(),
            model.spatial_dim(),
            summary.n_train
        )));
    }
    let out_dir = args.out.clone().unwrap_or_else(|| args.model.clone());
    let staging = Staging::new(&out_dir)?;
    let restore = |v: DVector<f64>| match &mean {
        Some(m) => v + m,
        None => v,
    };

    let mut max_imag = 0.0f64;
    let mut rel_error = Vec::with_capacity(summary.n_train);
    for k in 0..summary.n_train {
        let rec = model.reconstruct(k);
        max_imag = max_imag.max(rec.imag_ratio);
        let values = restore(rec.values);
        let truth = data.column(k);
        let norm = truth.norm();
        let err = (values - truth).norm();
        rel_error.push(if norm > 0.0 { err / norm } else { err });
    }
    for &k in &args.k {
        let values = restore(model.reconstruct(k).values);
        write_matrix(
            &staging.path(&format!("recon_{k}.csv"))?,
            &DMatrix::from_column_slice(values.len(), 1, values.as_slice()),
        )?;
    }
    let forecast = model.forecast(args.horizon, summary.n_train)?;
    for h in 0..args.horizon {
        max_imag = max_imag.max(model.reconstruct(summary.n_train + h).imag_ratio);
    }
    let mut fc = forecast.data.clone();
    if let Some(m) = &mean {
        for mut c in fc.column_iter_mut() {
            c += m;
        }
    }
    write_matrix(&staging.path("forecast.csv")?, &fc)?;
    let report = ReconReport {
        toolkit_version: version(),
        rank: model.len(),
        n_train: summary.n_train,
        horizon: args.horizon,
        requested: args.k.clone(),
        max_rel_error: rel_error.iter().cloned().fold(0.0, f64::max),
        rel_error,
        max_imag_ratio: finite(max_imag),
        forecast_saturated: forecast.saturated,
    };
    write_json(&staging.path("recon_report.json")?, &report)?;
    staging.commit()
}

pub fn heatmap(args: &HeatmapArgs) -> CliResult<()> {
    let grid = read_csv(&args.input, false)?;
    write_file_atomic(&args.output, &ppm::render(&grid))
}
