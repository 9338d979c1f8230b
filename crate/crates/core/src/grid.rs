//! Angle grids and angular sampling heuristics.

use crate::error::{Error, Result};

/// Evenly spaced, end-exclusive grid of projection angles.
///
/// `angles[i] = start + i * range / count`; the end point `start + range` is
/// excluded so a 360 degree grid never duplicates its first angle.
#[derive(Debug, Clone, PartialEq)]
pub struct AngleGrid {
    start_deg: f64,
    range_deg: f64,
    count: usize,
}

impl AngleGrid {
    /// Builds a grid covering `range_deg` degrees (180 or 360) with `count` angles.
    pub fn new(start_deg: f64, range_deg: f64, count: usize) -> Result<Self> {
        if !(range_deg == 180.0 || range_deg == 360.0) {
            return Err(Error::param(
                "range_deg",
                format!("must be 180 or 360, got {range_deg}"),
            ));
        }
        if count == 0 {
            return Err(Error::param("count", "angle count must be at least 1"));
        }
        if !start_deg.is_finite() {
            return Err(Error::param("start_deg", "must be finite"));
        }
        Ok(AngleGrid {
            start_deg,
            range_deg,
            count,
        })
    }

    /// 180 degree grid starting at 0.
    pub fn half_turn(count: usize) -> Result<Self> {
        Self::new(0.0, 180.0, count)
    }

    /// 360 degree grid starting at 0.
    pub fn full_turn(count: usize) -> Result<Self> {
        Self::new(0.0, 360.0, count)
    }

    pub fn start_deg(&self) -> f64 {
        self.start_deg
    }

    pub fn range_deg(&self) -> f64 {
        self.range_deg
    }

    pub fn count(&self) -> usize {
        self.count
    }

    /// Angle of sample `i` in degrees.
    pub fn angle_deg(&self, i: usize) -> f64 {
        debug_assert!(i < self.count);
        self.start_deg + i as f64 * self.range_deg / self.count as f64
    }

    /// All angles in degrees, end-exclusive.
    pub fn angles_deg(&self) -> Vec<f64> {
        (0..self.count).map(|i| self.angle_deg(i)).collect()
    }

    /// Constant spacing between consecutive angles, in degrees.
    pub fn spacing_deg(&self) -> f64 {
        self.range_deg / self.count as f64
    }
}

/// Number of angular samples needed over 180 degrees for `n_spatial` detector
/// samples: round(pi * N / 2). Angular spacing in the Fourier domain then
/// matches the radial sample spacing.
pub fn recommended_angle_count(n_spatial: usize) -> usize {
    assert!(n_spatial >= 1, "n_spatial must be at least 1");
    (std::f64::consts::PI * n_spatial as f64 / 2.0).round() as usize
}

/// Spacing of a grid in degrees; convenience alias for `grid.spacing_deg()`.
pub fn angular_spacing(grid: &AngleGrid) -> f64 {
    grid.spacing_deg()
}
