//! Projected gradient descent over 8-bit projection sets.
//!
//! Each iteration simulates the accumulated dose of the current projections,
//! develops it through a threshold model, transforms the image-domain error
//! back to the projection domain by forward projection plus ramp filtering,
//! takes a step, and projects onto the feasible set of non-negative 8-bit
//! values.

use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::calibration::CalibrationCurve;
use crate::error::{is_positive, is_unit_open, Error, Result};
use crate::grid::AngleGrid;
use crate::image::{Image2D, ImageKind};
use crate::positivity::clamp_negatives;
use crate::sinogram::{Sinogram, SinogramDomain};
use crate::transform::{apply_filter, backproject_raw, radon, radon_raw, angular_weight, FilterSpec};

/// Development model mapping normalized dose to a cure fraction in [0, 1].
/// All variants are monotone non-decreasing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ThresholdModel {
    /// Step at `threshold`: cured at and above, washed away below.
    Hard { threshold: f64 },
    /// 0 below `lower`, 1 at and above `upper`, linear in between.
    Double { lower: f64, upper: f64 },
    /// Logistic 1 / (1 + exp(-(x - center)/width)).
    Sigmoid { center: f64, width: f64 },
}

impl ThresholdModel {
    pub fn hard(threshold: f64) -> Result<Self> {
        if !is_unit_open(threshold) {
            return Err(Error::param("threshold", "must lie in (0, 1)"));
        }
        Ok(ThresholdModel::Hard { threshold })
    }

    pub fn double(lower: f64, upper: f64) -> Result<Self> {
        if !is_positive(lower) || !upper.is_finite() || lower > upper {
            return Err(Error::param("thresholds", "need 0 < lower <= upper"));
        }
        Ok(ThresholdModel::Double { lower, upper })
    }

    pub fn sigmoid(center: f64, width: f64) -> Result<Self> {
        if !is_unit_open(center) {
            return Err(Error::param("center", "must lie in (0, 1)"));
        }
        if !is_positive(width) {
            return Err(Error::param("width", "must be positive"));
        }
        Ok(ThresholdModel::Sigmoid { center, width })
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            ThresholdModel::Hard { threshold } => ThresholdModel::hard(threshold).map(|_| ()),
            ThresholdModel::Double { lower, upper } => {
                ThresholdModel::double(lower, upper).map(|_| ())
            }
            ThresholdModel::Sigmoid { center, width } => {
                ThresholdModel::sigmoid(center, width).map(|_| ())
            }
        }
    }

    /// Cure fraction for normalized dose `x`.
    pub fn apply(&self, x: f64) -> f64 {
        match *self {
            ThresholdModel::Hard { threshold } => {
                if x >= threshold {
                    1.0
                } else {
                    0.0
                }
            }
            ThresholdModel::Double { lower, upper } => {
                if x < lower {
                    0.0
                } else if x >= upper {
                    1.0
                } else {
                    (x - lower) / (upper - lower)
                }
            }
            ThresholdModel::Sigmoid { center, width } => {
                1.0 / (1.0 + (-(x - center) / width).exp())
            }
        }
    }

    /// Midpoint used for hard development when reporting errors, so error
    /// histories are comparable across models.
    pub fn center(&self) -> f64 {
        match *self {
            ThresholdModel::Hard { threshold } => threshold,
            ThresholdModel::Double { lower, upper } => 0.5 * (lower + upper),
            ThresholdModel::Sigmoid { center, .. } => center,
        }
    }
}

/// How the first projection set is produced.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitMode {
    /// Uniform random 8-bit values from a seeded generator.
    Random { seed: u64 },
    /// Non-negativized filtered projections of the target, rescaled to 255.
    CtBased,
}

/// Settings for [`optimize`].
#[derive(Debug, Clone)]
pub struct OptimizeConfig {
    pub grid: AngleGrid,
    pub model: ThresholdModel,
    pub init: InitMode,
    /// Descent step; 1 attempts a full correction of the normalized error.
    pub step_size: f64,
    pub max_iters: usize,
    /// Project onto integer levels every iteration (the physical constraint
    /// set). When false, iterates stay in the continuous box [0, 255] and
    /// only the returned best iterate is quantized.
    pub quantize_each_iter: bool,
    pub calibration: CalibrationCurve,
    /// Stop once the normalized pixel error falls to this value.
    pub error_tolerance: f64,
    /// Filter for the error backprojection and CT init; None derives the
    /// windowed default from the grid and target size.
    pub filter: Option<FilterSpec>,
}

impl OptimizeConfig {
    pub fn new(grid: AngleGrid, model: ThresholdModel) -> Self {
        OptimizeConfig {
            grid,
            model,
            init: InitMode::CtBased,
            step_size: 1.0,
            max_iters: 50,
            quantize_each_iter: true,
            calibration: CalibrationCurve::default(),
            error_tolerance: 0.0,
            filter: None,
        }
    }

    fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if !is_positive(self.step_size) {
            return Err(Error::param("step_size", "must be positive"));
        }
        if self.max_iters == 0 {
            return Err(Error::param("max_iters", "must be at least 1"));
        }
        if !is_positive(self.calibration.mean_slope()) {
            return Err(Error::param(
                "calibration",
                "curve must reach a positive intensity",
            ));
        }
        Ok(())
    }

    fn filter_for(&self, n_x: usize) -> FilterSpec {
        self.filter
            .unwrap_or_else(|| FilterSpec::default_for(n_x, &self.grid))
    }
}

/// Outcome of an optimization run.
#[derive(Debug, Clone)]
pub struct OptimizeResult {
    /// Best projections found, quantized to 8 bits.
    pub projections: Sinogram,
    /// Unnormalized accumulated dose of those projections.
    pub dose: Image2D,
    /// Normalized pixel error after each iteration.
    pub error_history: Vec<f64>,
    /// Iteration index the returned projections come from.
    pub best_iter: usize,
}

impl OptimizeResult {
    /// Number of iterations needed to reach `tolerance`, if ever reached.
    pub fn iterations_to(&self, tolerance: f64) -> Option<usize> {
        self.error_history
            .iter()
            .position(|&e| e <= tolerance)
            .map(|i| i + 1)
    }

    /// Error of the returned projections.
    pub fn best_error(&self) -> f64 {
        self.error_history[self.best_iter]
    }
}

/// Accumulated dose of a projection set: projector values are mapped through
/// the calibration curve and backprojected with the angular quadrature
/// weight. The interpolation kernel's small negative lobes are clipped, since
/// physical dose cannot be negative.
pub fn forward_dose(proj: &Sinogram, cal: &CalibrationCurve, size: usize) -> Result<Image2D> {
    if proj.n_x() != size {
        return Err(Error::DimensionMismatch {
            what: "forward_dose size",
            expected: proj.n_x(),
            actual: size,
        });
    }
    let intensities: Vec<f64> = proj.as_slice().iter().map(|&v| cal.intensity(v)).collect();
    let w = angular_weight(proj.grid());
    let data: Vec<f64> = backproject_raw(&intensities, size, proj.grid())
        .into_iter()
        .map(|v| (v * w).max(0.0))
        .collect();
    Image2D::new(size, size, ImageKind::Dose, data)
}

/// Develops a max-normalized dose map through the threshold model.
pub fn apply_threshold(dose: &Image2D, model: &ThresholdModel) -> Image2D {
    let data: Vec<f64> = dose.as_slice().iter().map(|&v| model.apply(v)).collect();
    Image2D::new(dose.width(), dose.height(), ImageKind::ContinuousCure, data)
        .expect("threshold output lies in [0, 1]")
}

/// Euclidean projection onto the feasible set: the continuous box [0, 255],
/// or the integer levels {0, ..., 255} when `quantize` is set.
fn project_feasible(values: Vec<f64>, grid: &AngleGrid, n_x: usize, quantize: bool) -> Sinogram {
    let domain = if quantize {
        SinogramDomain::Quantized8
    } else {
        SinogramDomain::Real
    };
    let data: Vec<f64> = values
        .into_iter()
        .map(|v| {
            let v = v.clamp(0.0, 255.0);
            if quantize {
                v.round()
            } else {
                v
            }
        })
        .collect();
    Sinogram::from_rows_unchecked(n_x, grid.clone(), domain, data)
}

fn quantize_sinogram(s: &Sinogram) -> Sinogram {
    if s.domain() == SinogramDomain::Quantized8 {
        return s.clone();
    }
    project_feasible(s.as_slice().to_vec(), s.grid(), s.n_x(), true)
}

/// Hard development of a dose map at `threshold` (inclusive), after
/// max-normalization.
fn develop_normalized(dose: &Image2D, threshold: f64) -> Image2D {
    let m = dose.max_value();
    let data: Vec<f64> = dose
        .as_slice()
        .iter()
        .map(|&v| {
            let x = if m > 0.0 { v / m } else { v };
            if x >= threshold {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    Image2D::new(dose.width(), dose.height(), ImageKind::TargetMask, data)
        .expect("development output is binary")
}

/// Normalized pixel error of a projection set against the target under hard
/// development at the model's center threshold.
pub fn development_error(
    proj: &Sinogram,
    target: &Image2D,
    cfg: &OptimizeConfig,
) -> Result<f64> {
    let n = target.side()?;
    let dose = forward_dose(proj, &cfg.calibration, n)?;
    let developed = develop_normalized(&dose, cfg.model.center());
    developed.mismatch_fraction(target)
}

/// One iteration of the optimization loop.
pub fn pgd_step(p_n: &Sinogram, target: &Image2D, cfg: &OptimizeConfig) -> Result<Sinogram> {
    let n = target.side()?;
    if p_n.n_x() != n {
        return Err(Error::DimensionMismatch {
            what: "pgd_step projections",
            expected: n,
            actual: p_n.n_x(),
        });
    }
    let dose = forward_dose(p_n, &cfg.calibration, n)?;
    let max_dose = dose.max_value();
    let normalized = dose.normalized_by_max();
    // image-domain error of the developed image
    let delta: Vec<f64> = normalized
        .as_slice()
        .iter()
        .zip(target.as_slice())
        .map(|(&d, &t)| cfg.model.apply(d) - t)
        .collect();

    // back to the projection domain: forward projection, then ramp filtering
    let delta_rows = radon_raw(&delta, n, &cfg.grid);
    let delta_sino =
        Sinogram::from_rows_unchecked(n, cfg.grid.clone(), SinogramDomain::Real, delta_rows);
    let filtered = apply_filter(&delta_sino, &cfg.filter_for(n));

    // Projector-unit gain: backprojecting the filtered correction changes the
    // dose by roughly the correction itself, and thresholds see dose divided
    // by its maximum, so max_dose / slope converts a normalized correction to
    // projector levels. Requesting the full indicated correction at once
    // destabilizes the loop (the maximum itself moves, dragging the threshold
    // with it), so a unit step applies a tenth of it. An idle projection set
    // has no dose scale yet; unit amplitude serves as the kick.
    let scale = if max_dose > 0.0 { max_dose } else { 1.0 };
    let gain = 0.1 * cfg.step_size * scale / cfg.calibration.mean_slope();

    let updated: Vec<f64> = p_n
        .as_slice()
        .iter()
        .zip(filtered.as_slice())
        .map(|(&p, &d)| p - gain * d)
        .collect();
    Ok(project_feasible(
        updated,
        &cfg.grid,
        n,
        cfg.quantize_each_iter,
    ))
}

/// Initial projection set for a target.
pub fn init_projections(
    target: &Image2D,
    grid: &AngleGrid,
    mode: InitMode,
    filter: &FilterSpec,
) -> Result<Sinogram> {
    let n = target.side()?;
    match mode {
        InitMode::Random { seed } => {
            let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed);
            // 256 divides 2^32, so the modulo is exactly uniform
            let data: Vec<f64> = (0..n * grid.count())
                .map(|_| (rng.next_u32() % 256) as f64)
                .collect();
            Ok(Sinogram::from_rows_unchecked(
                n,
                grid.clone(),
                SinogramDomain::Quantized8,
                data,
            ))
        }
        InitMode::CtBased => {
            let filtered = apply_filter(&radon(target, grid)?, filter);
            let positive = clamp_negatives(&filtered);
            let m = positive.max_value();
            let rescaled = if m > 0.0 {
                positive.map(|v| (v * 255.0 / m).round())
            } else {
                positive
            };
            Ok(quantize_sinogram(&rescaled))
        }
    }
}

/// Runs projected gradient descent until the error tolerance or the
/// iteration budget is reached. Returns the best iterate seen; the error is
/// not guaranteed monotone under the non-convex development model.
pub fn optimize(target: &Image2D, cfg: &OptimizeConfig) -> Result<OptimizeResult> {
    cfg.validate()?;
    if target.kind() != ImageKind::TargetMask {
        return Err(Error::param("target", "must be a binary target mask"));
    }
    let n = target.side()?;
    let filter = cfg.filter_for(n);

    let mut current = init_projections(target, &cfg.grid, cfg.init, &filter)?;
    let mut history = Vec::with_capacity(cfg.max_iters);
    let mut best = current.clone();
    let mut best_err = f64::INFINITY;
    let mut best_iter = 0usize;

    for iter in 0..cfg.max_iters {
        current = pgd_step(&current, target, cfg)?;
        let err = development_error(&current, target, cfg)?;
        history.push(err);
        if err < best_err {
            best_err = err;
            best = current.clone();
            best_iter = iter;
        }
        if best_err <= cfg.error_tolerance {
            break;
        }
    }

    let projections = quantize_sinogram(&best);
    let dose = forward_dose(&projections, &cfg.calibration, n)?;
    Ok(OptimizeResult {
        projections,
        dose,
        error_history: history,
        best_iter,
    })
}

/// Develops `scale * normalized dose` for each scale, modelling exposure time
/// (rotation count) as a linear dose multiplier.
pub fn exposure_sweep(
    proj: &Sinogram,
    scales: &[f64],
    model: &ThresholdModel,
    cal: &CalibrationCurve,
) -> Result<Vec<Image2D>> {
    for &s in scales {
        if !is_positive(s) {
            return Err(Error::param("scales", "exposure scales must be positive"));
        }
    }
    let dose = forward_dose(proj, cal, proj.n_x())?;
    let normalized = dose.normalized_by_max();
    let t = model.center();
    Ok(scales
        .iter()
        .map(|&s| {
            let data: Vec<f64> = normalized
                .as_slice()
                .iter()
                .map(|&v| if s * v >= t { 1.0 } else { 0.0 })
                .collect();
            Image2D::new(proj.n_x(), proj.n_x(), ImageKind::TargetMask, data)
                .expect("developed masks are binary")
        })
        .collect())
}
