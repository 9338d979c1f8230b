//! Projector value to optical intensity calibration.

use std::fs;
use std::path::Path;

use crate::error::{is_positive, Error, Result};

/// Monotone map from 8-bit projector values to intensities in W/cm^2.
///
/// Between samples the curve interpolates linearly; above the last sampled
/// value it holds constant. The curve always maps 0 to 0.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationCurve {
    samples: Vec<(u8, f64)>,
}

impl CalibrationCurve {
    /// Linear curve: value/255 * `i_max`.
    pub fn linear(i_max: f64) -> Result<Self> {
        if !is_positive(i_max) {
            return Err(Error::param("i_max", "peak intensity must be positive"));
        }
        Ok(CalibrationCurve {
            samples: vec![(0, 0.0), (255, i_max)],
        })
    }

    /// Builds a curve from (value, intensity) samples.
    ///
    /// Samples must start at (0, 0), be strictly increasing in value, and
    /// non-decreasing in intensity.
    pub fn from_samples(samples: Vec<(u8, f64)>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::param("samples", "calibration needs samples"));
        }
        if samples[0] != (0, 0.0) {
            return Err(Error::param("samples", "curve must map 0 to 0"));
        }
        for w in samples.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(Error::param("samples", "values must strictly increase"));
            }
            if w[1].1 < w[0].1 {
                return Err(Error::param("samples", "intensity must not decrease"));
            }
        }
        for &(_, i) in &samples {
            if !i.is_finite() || i < 0.0 {
                return Err(Error::param("samples", "intensities must be finite and >= 0"));
            }
        }
        Ok(CalibrationCurve { samples })
    }

    /// Loads a two-column CSV `dlp_value,intensity_w_cm2` with a header row.
    pub fn load_csv(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::format("calibration CSV", "empty file"))?;
        if header.trim() != "dlp_value,intensity_w_cm2" {
            return Err(Error::format(
                "calibration CSV",
                format!("unexpected header {header:?}"),
            ));
        }
        let mut samples = Vec::new();
        for (i, line) in lines.enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let mut cols = line.split(',');
            let v: u8 = cols
                .next()
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| Error::format("calibration CSV", format!("bad value, row {}", i + 2)))?;
            let intensity: f64 = cols
                .next()
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| {
                    Error::format("calibration CSV", format!("bad intensity, row {}", i + 2))
                })?;
            if cols.next().is_some() {
                return Err(Error::format(
                    "calibration CSV",
                    format!("too many columns, row {}", i + 2),
                ));
            }
            samples.push((v, intensity));
        }
        CalibrationCurve::from_samples(samples)
    }

    /// Intensity for a (possibly fractional) projector value, clamped to [0, 255].
    pub fn intensity(&self, value: f64) -> f64 {
        let v = value.clamp(0.0, 255.0);
        let last = self.samples.len() - 1;
        if v >= self.samples[last].0 as f64 {
            return self.samples[last].1;
        }
        // v < last sample value, and samples start at 0, so a bracket exists.
        let hi = self
            .samples
            .iter()
            .position(|&(sv, _)| (sv as f64) > v)
            .unwrap_or(last);
        let (v0, i0) = self.samples[hi - 1];
        let (v1, i1) = self.samples[hi];
        let t = (v - v0 as f64) / (v1 as f64 - v0 as f64);
        i0 + t * (i1 - i0)
    }

    /// Average slope over the full 8-bit range; the linearization used when
    /// converting dose-domain corrections back to projector units.
    pub fn mean_slope(&self) -> f64 {
        self.intensity(255.0) / 255.0
    }

    pub fn samples(&self) -> &[(u8, f64)] {
        &self.samples
    }
}

impl Default for CalibrationCurve {
    /// Linear curve peaking at 1 W/cm^2.
    fn default() -> Self {
        CalibrationCurve::linear(1.0).unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn linear_endpoints() {
        let c = CalibrationCurve::linear(2.0).unwrap();
        assert_eq!(c.intensity(0.0), 0.0);
        assert_eq!(c.intensity(255.0), 2.0);
        assert!((c.intensity(127.5) - 1.0).abs() < 1e-12);
        assert_eq!(c.mean_slope(), 2.0 / 255.0);
    }

    #[test]
    fn rejects_bad_curves() {
        assert!(CalibrationCurve::from_samples(vec![]).is_err());
        assert!(CalibrationCurve::from_samples(vec![(10, 0.0)]).is_err());
        assert!(CalibrationCurve::from_samples(vec![(0, 0.0), (5, 1.0), (5, 2.0)]).is_err());
        assert!(CalibrationCurve::from_samples(vec![(0, 0.0), (5, 1.0), (10, 0.5)]).is_err());
    }

    #[test]
    fn holds_beyond_last_sample() {
        let c = CalibrationCurve::from_samples(vec![(0, 0.0), (100, 1.5)]).unwrap();
        assert_eq!(c.intensity(100.0), 1.5);
        assert_eq!(c.intensity(200.0), 1.5);
        assert!((c.intensity(50.0) - 0.75).abs() < 1e-12);
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cal.csv");
        std::fs::write(
            &path,
            "dlp_value,intensity_w_cm2\n0,0.0\n128,0.02\n255,0.05\n",
        )
        .unwrap();
        let c = CalibrationCurve::load_csv(&path).unwrap();
        assert_eq!(c.samples().len(), 3);
        assert!((c.intensity(255.0) - 0.05).abs() < 1e-12);
    }

    proptest! {
        // v1 <= v2 implies intensity(v1) <= intensity(v2), for arbitrary
        // monotone curves.
        #[test]
        fn interpolation_monotone(
            mut raw in proptest::collection::vec((1u8..=255, 0.0f64..10.0), 1..8),
            v1 in 0.0f64..255.0,
            v2 in 0.0f64..255.0,
        ) {
            raw.sort_by_key(|&(v, _)| v);
            raw.dedup_by_key(|&mut (v, _)| v);
            let mut samples = vec![(0u8, 0.0f64)];
            let mut acc = 0.0;
            for (v, step) in raw {
                acc += step;
                samples.push((v, acc));
            }
            let c = CalibrationCurve::from_samples(samples).unwrap();
            let (lo, hi) = if v1 <= v2 { (v1, v2) } else { (v2, v1) };
            prop_assert!(c.intensity(lo) <= c.intensity(hi) + 1e-12);
        }
    }
}
