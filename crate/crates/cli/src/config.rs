//! Resolved run configuration, written next to every artifact and optionally
//! loaded back with `--config`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tomolith::optimize::{InitMode, OptimizeConfig, ThresholdModel};
use tomolith::{AngleGrid, CalibrationCurve, FilterSpec};

use crate::cli_error::{CliError, CliResult};

pub const CONFIG_VERSION: &str = "1";

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterConfig {
    /// "ramp-exp", "ramp", or "none".
    pub kind: String,
    /// Window scale in cycles/pixel; None derives the default from the grid.
    pub k0: Option<f64>,
}

impl FilterConfig {
    pub fn parse(text: &str) -> CliResult<Self> {
        let (kind, k0) = match text.split_once(':') {
            Some((k, v)) => {
                let k0: f64 = v
                    .parse()
                    .map_err(|_| CliError::Usage(format!("bad filter scale in {text:?}")))?;
                (k, Some(k0))
            }
            None => (text, None),
        };
        match kind {
            "ramp-exp" | "ramp" | "none" => Ok(FilterConfig {
                kind: kind.to_string(),
                k0,
            }),
            other => Err(CliError::Usage(format!(
                "unknown filter {other:?}; expected ramp-exp[:k0], ramp, or none"
            ))),
        }
    }

    pub fn to_spec(&self, n_x: usize, grid: &AngleGrid) -> CliResult<FilterSpec> {
        match self.kind.as_str() {
            "ramp-exp" => match self.k0 {
                Some(k0) => FilterSpec::ramp_exponential(k0).map_err(Into::into),
                None => Ok(FilterSpec::default_for(n_x, grid)),
            },
            "ramp" => Ok(FilterSpec::pure_ramp()),
            "none" => Ok(FilterSpec::none()),
            other => Err(CliError::Usage(format!("unknown filter {other:?}"))),
        }
    }
}

/// Everything an `optimize`-family run needs, with a schema version.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub version: String,
    pub target: Option<PathBuf>,
    pub angles: usize,
    pub start_deg: f64,
    pub range_deg: f64,
    pub model: ThresholdModel,
    pub init: InitMode,
    pub iters: usize,
    pub eta: f64,
    pub quantize_each_iter: bool,
    pub error_tolerance: f64,
    pub filter: FilterConfig,
    /// Peak intensity of the default linear calibration, W/cm^2.
    pub i_max_w_cm2: f64,
    /// Optional measured curve overriding the linear default.
    pub calibration_csv: Option<PathBuf>,
    /// Gray level above which a loaded target pixel counts as solid.
    pub binarize_cut: f64,
}

impl RunConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)?;
        let cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::Usage(format!("bad config {}: {e}", path.display())))?;
        if cfg.version != CONFIG_VERSION {
            return Err(CliError::Usage(format!(
                "config version {:?} not supported (expected {CONFIG_VERSION:?})",
                cfg.version
            )));
        }
        Ok(cfg)
    }

    pub fn write(&self, dir: &Path) -> CliResult<()> {
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| CliError::Runtime(format!("config serialization: {e}")))?;
        std::fs::write(dir.join("config.json"), text + "\n")?;
        Ok(())
    }

    pub fn grid(&self) -> CliResult<AngleGrid> {
        AngleGrid::new(self.start_deg, self.range_deg, self.angles).map_err(Into::into)
    }

    pub fn calibration(&self) -> CliResult<CalibrationCurve> {
        match &self.calibration_csv {
            Some(path) => CalibrationCurve::load_csv(path).map_err(Into::into),
            None => CalibrationCurve::linear(self.i_max_w_cm2).map_err(Into::into),
        }
    }

    pub fn to_optimize_config(&self, n_x: usize) -> CliResult<OptimizeConfig> {
        let grid = self.grid()?;
        let filter = self.filter.to_spec(n_x, &grid)?;
        let mut cfg = OptimizeConfig::new(grid, self.model);
        cfg.init = self.init;
        cfg.step_size = self.eta;
        cfg.max_iters = self.iters;
        cfg.quantize_each_iter = self.quantize_each_iter;
        cfg.calibration = self.calibration()?;
        cfg.error_tolerance = self.error_tolerance;
        cfg.filter = Some(filter);
        Ok(cfg)
    }
}

pub fn parse_model(text: &str) -> CliResult<ThresholdModel> {
    let (kind, params) = text
        .split_once(':')
        .ok_or_else(|| CliError::Usage(format!("model {text:?} needs parameters")))?;
    let nums: Vec<f64> = params
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| CliError::Usage(format!("bad model parameters in {text:?}")))?;
    let model = match (kind, nums.as_slice()) {
        ("hard", [t]) => ThresholdModel::hard(*t),
        ("double", [lo, hi]) => ThresholdModel::double(*lo, *hi),
        ("sigmoid", [mu, sigma]) => ThresholdModel::sigmoid(*mu, *sigma),
        _ => {
            return Err(CliError::Usage(format!(
                "unknown model {text:?}; expected hard:T, double:lo,hi, or sigmoid:mu,sigma"
            )))
        }
    };
    model.map_err(Into::into)
}
