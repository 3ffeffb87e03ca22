//! Run configuration, echoed into `summary.json`.

use kmd_core::{log_grid, AdmmParams, GridShape, InputFormat, LoadOptions, ModeStyle, SweepParams};
use serde::{Deserialize, Serialize};

use crate::args::{DecomposeArgs, FormatArg, InputArgs, MethodArg, ModeStyleArg, SolverArgs, SweepArgs};
use crate::error::{CliError, CliResult};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InputConfig {
    pub path: String,
    pub format: InputFormat,
    pub grid: Option<GridShape>,
    pub mask: Option<String>,
    pub cycle: usize,
    pub header: bool,
    pub transpose: bool,
    pub subtract_mean: bool,
    pub dt_label: String,
}

impl InputConfig {
    pub fn load_options(&self) -> LoadOptions {
        LoadOptions {
            format: self.format,
            grid: self.grid,
            header: self.header,
            transpose: self.transpose,
            dt_label: self.dt_label.clone(),
        }
    }

    fn validate(&self) -> CliResult<()> {
        if self.cycle == 0 {
            return Err(CliError::Usage("--cycle must be at least 1".into()));
        }
        if self.mask.is_some() && self.grid.is_none() {
            return Err(CliError::Usage("--mask needs --grid".into()));
        }
        Ok(())
    }
}

impl From<&InputArgs> for InputConfig {
    fn from(a: &InputArgs) -> Self {
        Self {
            path: a.input.display().to_string(),
            format: match a.format {
                FormatArg::Csv => InputFormat::Csv,
                FormatArg::RawF64 => InputFormat::RawF64,
            },
            grid: a.grid,
            mask: a.mask.as_ref().map(|p| p.display().to_string()),
            cycle: a.cycle,
            header: a.header,
            transpose: a.transpose,
            subtract_mean: a.subtract_mean,
            dt_label: a.dt_label.clone(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodConfig {
    Dmd,
    Cdmd,
    Spdmd,
}

impl From<MethodArg> for MethodConfig {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Dmd => MethodConfig::Dmd,
            MethodArg::Cdmd => MethodConfig::Cdmd,
            MethodArg::Spdmd => MethodConfig::Spdmd,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GammaSpec {
    /// Geometric grid including both endpoints.
    Log { min: f64, max: f64, count: usize },
    List(Vec<f64>),
}

impl GammaSpec {
    pub fn values(&self) -> CliResult<Vec<f64>> {
        match self {
            GammaSpec::Log { min, max, count } => {
                if *count == 0 {
                    return Err(CliError::Usage("--gamma-count must be at least 1".into()));
                }
                if !(min <= max) {
                    return Err(CliError::Usage(format!("--gamma-min {min} exceeds --gamma-max {max}")));
                }
                if *count > 1 && !(*min > 0.0) {
                    return Err(CliError::Usage("a log-spaced grid needs --gamma-min > 0".into()));
                }
                log_grid(*min, *max, *count).map_err(|e| CliError::Usage(e.to_string()))
            }
            GammaSpec::List(v) => {
                if v.is_empty() {
                    return Err(CliError::Usage("empty --gamma list".into()));
                }
                if let Some(g) = v.iter().find(|g| !(**g >= 0.0) || !g.is_finite()) {
                    return Err(CliError::Usage(format!("sparsity weights must be finite and ≥ 0, got {g}")));
                }
                Ok(v.clone())
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub rho: f64,
    pub eps_abs: f64,
    pub eps_rel: f64,
    pub max_iter: usize,
    pub warm_start: bool,
}

impl SolverConfig {
    pub fn sweep_params(&self) -> SweepParams {
        SweepParams {
            admm: AdmmParams {
                rho: self.rho,
                eps_abs: self.eps_abs,
                eps_rel: self.eps_rel,
                max_iter: self.max_iter,
            },
            warm_start: self.warm_start,
        }
    }

    fn validate(&self) -> CliResult<()> {
        if !(self.rho > 0.0) || !self.rho.is_finite() {
            return Err(CliError::Usage(format!("--rho must be positive, got {}", self.rho)));
        }
        if !(self.eps_abs >= 0.0) || !(self.eps_rel >= 0.0) || self.eps_abs + self.eps_rel == 0.0 {
            return Err(CliError::Usage("solver tolerances must be non-negative and not both zero".into()));
        }
        if self.max_iter == 0 {
            return Err(CliError::Usage("--max-iter must be at least 1".into()));
        }
        Ok(())
    }
}

impl From<&SolverArgs> for SolverConfig {
    fn from(a: &SolverArgs) -> Self {
        Self {
            rho: a.rho,
            eps_abs: a.eps_abs,
            eps_rel: a.eps_rel,
            max_iter: a.max_iter,
            warm_start: !a.no_warm_start,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub input: InputConfig,
    pub method: MethodConfig,
    pub rank: Option<usize>,
    pub mode_style: ModeStyle,
    pub gamma: Option<GammaSpec>,
    pub solver: SolverConfig,
    pub pair_collapse: bool,
    pub slot_mean: bool,
}

impl RunConfig {
    pub fn from_decompose(a: &DecomposeArgs) -> CliResult<Self> {
        let cfg = Self {
            input: InputConfig::from(&a.input),
            method: a.method.into(),
            rank: a.rank,
            mode_style: style(a.mode_style),
            gamma: a.gamma.map(|g| GammaSpec::List(vec![g])),
            solver: SolverConfig::from(&a.solver),
            pair_collapse: a.pair_collapse,
            slot_mean: a.slot_layout == crate::args::SlotLayoutArg::Mean,
        };
        match (cfg.method, &cfg.gamma) {
            (MethodConfig::Spdmd, None) => return Err(CliError::Usage("--method spdmd needs --gamma".into())),
            (MethodConfig::Dmd | MethodConfig::Cdmd, Some(_)) => {
                return Err(CliError::Usage("--gamma only applies to --method spdmd".into()))
            }
            _ => {}
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_sweep(a: &SweepArgs) -> CliResult<Self> {
        if a.method != MethodArg::Spdmd {
            return Err(CliError::Usage("sweep requires --method spdmd".into()));
        }
        let gamma = match (&a.gamma, a.gamma_min, a.gamma_max, a.gamma_count) {
            (Some(list), None, None, None) => GammaSpec::List(list.clone()),
            (None, Some(min), Some(max), Some(count)) => GammaSpec::Log { min, max, count },
            _ => {
                return Err(CliError::Usage(
                    "give either --gamma LIST or --gamma-min/--gamma-max/--gamma-count".into(),
                ))
            }
        };
        let cfg = Self {
            input: InputConfig::from(&a.input),
            method: MethodConfig::Spdmd,
            rank: a.rank,
            mode_style: style(a.mode_style),
            gamma: Some(gamma),
            solver: SolverConfig::from(&a.solver),
            pair_collapse: false,
            slot_mean: false,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn gammas(&self) -> CliResult<Vec<f64>> {
        match &self.gamma {
            Some(spec) => spec.values(),
            None => Err(CliError::Usage("no sparsity weights given".into())),
        }
    }

    fn validate(&self) -> CliResult<()> {
        self.input.validate()?;
        self.solver.validate()?;
        if self.rank == Some(0) {
            return Err(CliError::Usage("--rank must be at least 1".into()));
        }
        if self.gamma.is_some() {
            self.gammas()?;
        }
        Ok(())
    }
}

fn style(s: ModeStyleArg) -> ModeStyle {
    match s {
        ModeStyleArg::Exact => ModeStyle::Exact,
        ModeStyleArg::Projected => ModeStyle::Projected,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gamma_spec_validation() {
        let g = GammaSpec::Log { min: 1.0, max: 100.0, count: 3 }.values().unwrap();
        assert_eq!((g[0], g[2]), (1.0, 100.0));
        assert!((g[1] - 10.0).abs() < 1e-12);
        assert!(GammaSpec::Log { min: 0.0, max: 1.0, count: 3 }.values().is_err());
        assert!(GammaSpec::Log { min: 2.0, max: 1.0, count: 3 }.values().is_err());
        assert_eq!(GammaSpec::Log { min: 0.0, max: 0.0, count: 1 }.values().unwrap(), vec![0.0]);
        assert!(GammaSpec::List(vec![]).values().is_err());
        assert!(GammaSpec::List(vec![-1.0]).values().is_err());
        assert!(GammaSpec::List(vec![f64::NAN]).values().is_err());
    }

    #[test]
    fn config_round_trips_through_json() {
        let cfg = RunConfig {
            input: InputConfig {
                path: "x.csv".into(),
                format: InputFormat::RawF64,
                grid: Some(GridShape::new(2, 3)),
                mask: None,
                cycle: 3,
                header: false,
                transpose: true,
                subtract_mean: true,
                dt_label: "month".into(),
            },
            method: MethodConfig::Spdmd,
            rank: Some(4),
            mode_style: ModeStyle::Projected,
            gamma: Some(GammaSpec::Log { min: 0.1, max: 10.0, count: 5 }),
            solver: SolverConfig {
                rho: 1.0,
                eps_abs: 1e-6,
                eps_rel: 1e-4,
                max_iter: 10,
                warm_start: true,
            },
            pair_collapse: true,
            slot_mean: false,
        };
        let text = serde_json::to_string(&cfg).unwrap();
        let back: RunConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, cfg);
    }
}
