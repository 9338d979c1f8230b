//! Sizing calculator for a concentric microlens/LED lightfield projector.
//!
//! A lens array of pitch r/N wrapped at radius R around a target of radius r
//! trades spatial against angular resolution: each lens must cover the
//! half-angle arctan(r/R) with enough subpixels to honor the 2/N radian
//! angular sampling.

use serde::Serialize;

use crate::error::{is_positive, Error, Result};
use crate::grid::recommended_angle_count;

/// Input geometry for the design formulas.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LightfieldGeometry {
    /// Target (print volume) radius in meters.
    pub target_radius_m: f64,
    /// Lens array radius in meters.
    pub outer_radius_m: f64,
    /// Spatial samples per transverse dimension.
    pub n_spatial: usize,
}

/// Derived design quantities.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LightfieldDesign {
    pub n_angular: usize,
    pub angular_spacing_rad: f64,
    pub angular_spacing_deg: f64,
    pub subpixels_per_lens: usize,
    pub lens_pitch_m: f64,
    pub subpixel_size_m: f64,
    pub half_angle_deg: f64,
}

fn check_radii(r: f64, outer: f64) -> Result<()> {
    if !is_positive(r) {
        return Err(Error::param("target_radius", "must be positive"));
    }
    if !outer.is_finite() || outer <= r {
        return Err(Error::param(
            "outer_radius",
            "must exceed the target radius",
        ));
    }
    Ok(())
}

/// Sizes the projector for target radius `r`, outer radius `outer`, and `n`
/// spatial samples.
pub fn design_from_radii(r: f64, outer: f64, n: usize) -> Result<LightfieldDesign> {
    check_radii(r, outer)?;
    if n == 0 {
        return Err(Error::param("n_spatial", "must be at least 1"));
    }
    let half_angle = (r / outer).atan();
    // a fractional subpixel cannot be addressed, so truncate
    let subpixels = (n as f64 * half_angle).floor() as usize;
    if subpixels == 0 {
        return Err(Error::Infeasible(
            "geometry provides no angular resolution (zero subpixels per lens)".into(),
        ));
    }
    Ok(LightfieldDesign {
        n_angular: recommended_angle_count(n),
        angular_spacing_rad: 2.0 / n as f64,
        angular_spacing_deg: (2.0 / n as f64).to_degrees(),
        subpixels_per_lens: subpixels,
        lens_pitch_m: r / n as f64,
        subpixel_size_m: r / (n as f64 * n as f64 * half_angle),
        half_angle_deg: half_angle.to_degrees(),
    })
}

/// Outer radius required to reach subpixel size `lambda` at target radius `r`
/// with `n` spatial samples: the inversion of the subpixel-size formula.
pub fn solve_outer_radius(r: f64, n: usize, lambda: f64) -> Result<f64> {
    if !is_positive(r) {
        return Err(Error::param("target_radius", "must be positive"));
    }
    if n == 0 {
        return Err(Error::param("n_spatial", "must be at least 1"));
    }
    if !is_positive(lambda) {
        return Err(Error::param("lambda", "must be positive"));
    }
    let angle = r / (n as f64 * n as f64 * lambda);
    if angle >= std::f64::consts::FRAC_PI_2 {
        return Err(Error::Infeasible(format!(
            "required half-angle {angle:.3} rad is not below pi/2; no real outer radius"
        )));
    }
    Ok(r / angle.tan())
}
