//! Z-slice stacking: per-slice optimization, projector frame assembly for a
//! rotating-vial printer, and an attenuated dose simulation.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calibration::CalibrationCurve;
use crate::error::{is_positive, Error, Result};
use crate::grid::AngleGrid;
use crate::image::{write_pgm, Image2D, ImageKind};
use crate::optimize::{optimize, OptimizeConfig, OptimizeResult};
use crate::sinogram::Sinogram;
use crate::transform::angular_weight;

/// Stack of equally sized binary cross-sections, bottom to top.
#[derive(Debug, Clone)]
pub struct VolumeTarget {
    slices: Vec<Image2D>,
    z_pitch: f64,
}

impl VolumeTarget {
    pub fn new(slices: Vec<Image2D>, z_pitch: f64) -> Result<Self> {
        if slices.is_empty() {
            return Err(Error::param("slices", "a volume needs at least one slice"));
        }
        let n = slices[0].side()?;
        for (i, s) in slices.iter().enumerate() {
            if s.side()? != n {
                return Err(Error::Slice {
                    index: i,
                    source: Box::new(Error::DimensionMismatch {
                        what: "slice size",
                        expected: n,
                        actual: s.side()?,
                    }),
                });
            }
        }
        if !is_positive(z_pitch) {
            return Err(Error::param("z_pitch", "must be positive"));
        }
        Ok(VolumeTarget { slices, z_pitch })
    }

    pub fn slices(&self) -> &[Image2D] {
        &self.slices
    }

    pub fn z_pitch(&self) -> f64 {
        self.z_pitch
    }

    pub fn side(&self) -> usize {
        self.slices[0].side().expect("validated on construction")
    }
}

/// Timing and angle metadata accompanying a frame set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameManifest {
    pub rotation_speed_deg_per_s: f64,
    pub frame_rate_hz: f64,
    pub frames_per_revolution: u64,
    pub angle_start_deg: f64,
    pub angle_range_deg: f64,
}

/// One 8-bit projector frame per angle; row z of frame i is slice z's
/// projection row at angle i.
#[derive(Debug, Clone)]
pub struct FrameSet {
    frames: Vec<Vec<u8>>,
    n_x: usize,
    n_slices: usize,
    grid: AngleGrid,
    manifest: FrameManifest,
}

impl FrameSet {
    pub fn frames(&self) -> &[Vec<u8>] {
        &self.frames
    }

    pub fn frame(&self, i: usize) -> &[u8] {
        &self.frames[i]
    }

    pub fn n_x(&self) -> usize {
        self.n_x
    }

    pub fn n_slices(&self) -> usize {
        self.n_slices
    }

    pub fn grid(&self) -> &AngleGrid {
        &self.grid
    }

    pub fn manifest(&self) -> &FrameManifest {
        &self.manifest
    }

    /// Writes `frame_%05d.pgm` files plus `manifest.json` into `dir`.
    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        for (i, frame) in self.frames.iter().enumerate() {
            let path = dir.join(format!("frame_{i:05}.pgm"));
            write_pgm(&path, self.n_x, self.n_slices, frame)?;
        }
        let manifest = serde_json::to_string_pretty(&self.manifest)
            .map_err(|e| Error::format("manifest JSON", e.to_string()))?;
        std::fs::write(dir.join("manifest.json"), manifest + "\n")?;
        Ok(())
    }
}

/// Optimizes every slice independently; failures carry the slice index.
pub fn optimize_volume(vol: &VolumeTarget, cfg: &OptimizeConfig) -> Result<Vec<OptimizeResult>> {
    let results: Vec<std::result::Result<OptimizeResult, (usize, Error)>> = vol
        .slices
        .par_iter()
        .enumerate()
        .map(|(i, slice)| optimize(slice, cfg).map_err(|e| (i, e)))
        .collect();
    results
        .into_iter()
        .map(|r| {
            r.map_err(|(index, source)| Error::Slice {
                index,
                source: Box::new(source),
            })
        })
        .collect()
}

/// Stacks per-slice projections into per-angle projector frames.
///
/// The frame rate follows from showing one frame per angular spacing at the
/// given rotation speed.
pub fn assemble_frames(
    results: &[OptimizeResult],
    grid: &AngleGrid,
    rotation_speed_deg_per_s: f64,
) -> Result<FrameSet> {
    if results.is_empty() {
        return Err(Error::param("results", "need at least one slice"));
    }
    if !is_positive(rotation_speed_deg_per_s) {
        return Err(Error::param("rotation_speed", "must be positive"));
    }
    let n_x = results[0].projections.n_x();
    for (i, r) in results.iter().enumerate() {
        if r.projections.grid() != grid {
            return Err(Error::Slice {
                index: i,
                source: Box::new(Error::param("grid", "slice grid differs from frame grid")),
            });
        }
        if r.projections.n_x() != n_x {
            return Err(Error::Slice {
                index: i,
                source: Box::new(Error::DimensionMismatch {
                    what: "projection width",
                    expected: n_x,
                    actual: r.projections.n_x(),
                }),
            });
        }
    }

    let n_slices = results.len();
    let frames: Vec<Vec<u8>> = (0..grid.count())
        .map(|a| {
            let mut frame = Vec::with_capacity(n_slices * n_x);
            for r in results {
                frame.extend(r.projections.row(a).iter().map(|&v| v as u8));
            }
            frame
        })
        .collect();

    let spacing = grid.spacing_deg();
    let manifest = FrameManifest {
        rotation_speed_deg_per_s,
        frame_rate_hz: rotation_speed_deg_per_s / spacing,
        frames_per_revolution: (360.0 / spacing).round() as u64,
        angle_start_deg: grid.start_deg(),
        angle_range_deg: grid.range_deg(),
    };
    Ok(FrameSet {
        frames,
        n_x,
        n_slices,
        grid: grid.clone(),
        manifest,
    })
}

/// Entry parameter of the reconstruction square along a ray, if it hits.
///
/// The ray through centered detector coordinate `x` at angle `theta` is
/// `Rot_theta * (x, u)`; light propagates toward increasing `u`. The square
/// spans [-n/2, n/2] in both centered coordinates.
fn ray_entry(x: f64, sin_t: f64, cos_t: f64, half: f64) -> Option<f64> {
    // point(u) = (x cos - u sin, x sin + u cos)
    let mut t_min = f64::NEG_INFINITY;
    let mut t_max = f64::INFINITY;
    for (p0, dir) in [(x * cos_t, -sin_t), (x * sin_t, cos_t)] {
        if dir.abs() < 1e-300 {
            if p0.abs() > half {
                return None;
            }
            continue;
        }
        let t1 = (-half - p0) / dir;
        let t2 = (half - p0) / dir;
        let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
        t_min = t_min.max(lo);
        t_max = t_max.min(hi);
    }
    if t_min <= t_max {
        Some(t_min)
    } else {
        None
    }
}

/// Backprojection with Beer-Lambert decay exp(-alpha * d) along each ray,
/// where d is the distance light travelled inside the reconstruction square
/// before reaching the pixel. With alpha = 0 this reduces exactly to the
/// unattenuated dose.
pub fn attenuated_dose(
    proj: &Sinogram,
    cal: &CalibrationCurve,
    alpha: f64,
    size: usize,
) -> Result<Image2D> {
    if !alpha.is_finite() || alpha < 0.0 {
        return Err(Error::param("alpha", "attenuation must be non-negative"));
    }
    if proj.n_x() != size {
        return Err(Error::DimensionMismatch {
            what: "attenuated_dose size",
            expected: proj.n_x(),
            actual: size,
        });
    }
    let n = size;
    let c = (n as f64 - 1.0) / 2.0;
    let half = n as f64 / 2.0;
    let grid = proj.grid();
    let w = angular_weight(grid);
    let intensities: Vec<f64> = proj.as_slice().iter().map(|&v| cal.intensity(v)).collect();

    let trig: Vec<(f64, f64)> = (0..grid.count())
        .map(|a| grid.angle_deg(a).to_radians().sin_cos())
        .collect();
    // accumulation mirrors the unattenuated backprojection term by term so
    // that alpha = 0 reproduces it bitwise
    let mut out = vec![0.0; n * n];
    for py in 0..n {
        for px in 0..n {
            let mut acc = 0.0;
            for (a, &(sin_t, cos_t)) in trig.iter().enumerate() {
                let row = &intensities[a * n..(a + 1) * n];
                // centered ray coordinates of this pixel: detector offset x
                // and axial position u, with light travelling toward +u
                let cx = px as f64 - c;
                let cy = py as f64 - c;
                let x = cx * cos_t + cy * sin_t;
                let u = -cx * sin_t + cy * cos_t;
                let d = match ray_entry(x, sin_t, cos_t, half) {
                    Some(u_in) => (u - u_in).max(0.0),
                    None => 0.0,
                };
                let decay = (-alpha * d).exp();
                let q = x + c;
                let (base, weights) = crate::transform::detector_taps(q);
                for (k, &wt) in weights.iter().enumerate() {
                    let j = base + k as isize;
                    if (0..n as isize).contains(&j) && wt != 0.0 {
                        acc += row[j as usize] * wt * decay;
                    }
                }
            }
            out[py * n + px] = (acc * w).max(0.0);
        }
    }
    Image2D::new(n, n, ImageKind::Dose, out)
}
