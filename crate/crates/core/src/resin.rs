//! Free-radical photopolymerization kinetics and development thresholding.
//!
//! The cure rate scales with the square root of intensity, so the degree of
//! cure depends on intensity and time separately, not just on their product.
//! Dissolved oxygen and other inhibitors quench early radicals; curing only
//! starts once an induction budget has been spent.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{is_positive, is_unit_open, Error, Result};
use crate::image::{Image2D, ImageKind};

/// Kinetic constants of a resin. Field names carry units; values are
/// illustrative desk-scale placeholders unless calibrated against a real
/// formulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResinParams {
    /// Propagation over root-termination rate ratio, 1/(s * sqrt(W/cm^2)).
    pub kp_over_sqrt_kt_per_s_sqrt_cm2_per_w: f64,
    /// Quantum yield, dimensionless.
    pub quantum_yield: f64,
    /// Initial prepolymer concentration, mol/L.
    pub initial_monomer_mol_per_l: f64,
    /// Degree-of-cure threshold that survives development, in (0, 1).
    pub gel_point_doc: f64,
    /// Radical generation (sqrt(W/cm^2) * s) spent depleting inhibitors
    /// before any crosslinking happens.
    pub inhibitor_budget_sqrt_w_cm2_s: f64,
}

impl ResinParams {
    pub fn validate(&self) -> Result<()> {
        if !is_positive(self.kp_over_sqrt_kt_per_s_sqrt_cm2_per_w) {
            return Err(Error::param("kp_over_sqrt_kt", "must be positive"));
        }
        if !is_positive(self.quantum_yield) {
            return Err(Error::param("quantum_yield", "must be positive"));
        }
        if !is_positive(self.initial_monomer_mol_per_l) {
            return Err(Error::param("initial_monomer", "must be positive"));
        }
        if !is_unit_open(self.gel_point_doc) {
            return Err(Error::param("gel_point", "must lie in (0, 1)"));
        }
        if self.inhibitor_budget_sqrt_w_cm2_s < 0.0 {
            return Err(Error::param("inhibitor_budget", "must be non-negative"));
        }
        Ok(())
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let params: ResinParams = serde_json::from_str(&text)
            .map_err(|e| Error::format("resin params JSON", e.to_string()))?;
        params.validate()?;
        Ok(params)
    }
}

impl Default for ResinParams {
    fn default() -> Self {
        ResinParams {
            kp_over_sqrt_kt_per_s_sqrt_cm2_per_w: 0.5,
            quantum_yield: 0.6,
            initial_monomer_mol_per_l: 4.0,
            gel_point_doc: 0.1,
            inhibitor_budget_sqrt_w_cm2_s: 0.0,
        }
    }
}

/// Polymerization rate R_p = (k_p / sqrt(k_t)) * [M] * sqrt(phi * I),
/// in mol/(L*s).
pub fn propagation_rate(intensity: f64, monomer: f64, p: &ResinParams) -> f64 {
    p.kp_over_sqrt_kt_per_s_sqrt_cm2_per_w * monomer * (p.quantum_yield * intensity).sqrt()
}

/// Induction delay before curing starts at constant intensity, in seconds.
/// Infinite for zero intensity and a positive inhibitor budget.
pub fn induction_time(intensity: f64, p: &ResinParams) -> f64 {
    if p.inhibitor_budget_sqrt_w_cm2_s == 0.0 {
        return 0.0;
    }
    let rate = (p.quantum_yield * intensity).sqrt();
    if rate == 0.0 {
        f64::INFINITY
    } else {
        p.inhibitor_budget_sqrt_w_cm2_s / rate
    }
}

/// Degree of cure after exposing at constant `intensity` for `time` seconds:
/// 1 - exp(-(k_p/sqrt(k_t)) * sqrt(phi*I) * max(0, t - t_induction)).
pub fn doc_constant_intensity(intensity: f64, time: f64, p: &ResinParams) -> f64 {
    if intensity <= 0.0 || time <= 0.0 {
        return 0.0;
    }
    let t_eff = (time - induction_time(intensity, p)).max(0.0);
    let lambda = p.kp_over_sqrt_kt_per_s_sqrt_cm2_per_w * (p.quantum_yield * intensity).sqrt();
    1.0 - (-lambda * t_eff).exp()
}

/// Simulated intensity/time exposure array: cell (i, j) is true when
/// intensity `i` held for time `j` cures past the gel point.
pub fn dose_matrix(intensities: &[f64], times: &[f64], p: &ResinParams) -> Result<Vec<Vec<bool>>> {
    if intensities.is_empty() || times.is_empty() {
        return Err(Error::param("dose_matrix", "need at least one row and column"));
    }
    for &v in intensities.iter().chain(times) {
        if !v.is_finite() || v < 0.0 {
            return Err(Error::param("dose_matrix", "entries must be finite and >= 0"));
        }
    }
    Ok(intensities
        .iter()
        .map(|&i| {
            times
                .iter()
                .map(|&t| doc_constant_intensity(i, t, p) >= p.gel_point_doc)
                .collect()
        })
        .collect())
}

/// Development rinse: material at or above the gel point stays, the rest
/// washes away.
pub fn develop(doc_map: &Image2D, gel_point: f64) -> Result<Image2D> {
    if !is_unit_open(gel_point) {
        return Err(Error::param("gel_point", "must lie in (0, 1)"));
    }
    let data: Vec<f64> = doc_map
        .as_slice()
        .iter()
        .map(|&v| if v >= gel_point { 1.0 } else { 0.0 })
        .collect();
    Image2D::new(
        doc_map.width(),
        doc_map.height(),
        ImageKind::TargetMask,
        data,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> ResinParams {
        ResinParams::default()
    }

    #[test]
    fn propagation_rate_laws() {
        let p = params();
        assert_eq!(propagation_rate(0.0, 1.0, &p), 0.0);
        assert_eq!(propagation_rate(1.0, 0.0, &p), 0.0);
        // quadrupling intensity doubles the rate
        let r1 = propagation_rate(1.0, 2.0, &p);
        let r4 = propagation_rate(4.0, 2.0, &p);
        assert!((r4 - 2.0 * r1).abs() < 1e-12);
    }

    #[test]
    fn doc_limits() {
        let p = params();
        assert_eq!(doc_constant_intensity(1.0, 0.0, &p), 0.0);
        assert_eq!(doc_constant_intensity(0.0, 100.0, &p), 0.0);
        // approaches full cure for long exposures (rounds to 1.0 eventually)
        let d = doc_constant_intensity(1.0, 1e6, &p);
        assert!(d > 1.0 - 1e-12 && d <= 1.0);
        let d = doc_constant_intensity(1.0, 20.0, &p);
        assert!(d > 0.9 && d < 1.0);
        // below 1 for any finite exposure that stays clear of f64 rounding
        for t in [0.1, 1.0, 10.0, 50.0] {
            let d = doc_constant_intensity(0.5, t, &p);
            assert!((0.0..1.0).contains(&d));
        }
    }

    #[test]
    fn doc_monotone_in_time_and_intensity() {
        let p = params();
        let mut prev = -1.0;
        for i in 1..=20 {
            let d = doc_constant_intensity(1.0, i as f64 * 0.5, &p);
            assert!(d > prev);
            prev = d;
        }
        let mut prev = -1.0;
        for i in 1..=20 {
            let d = doc_constant_intensity(i as f64 * 0.25, 2.0, &p);
            assert!(d > prev);
            prev = d;
        }
    }

    #[test]
    fn equal_dose_is_not_equal_cure() {
        // sqrt(4I) * (t/4) = sqrt(I) * t / 2: the faster exposure cures less
        let p = params();
        for (i, t) in [(0.5, 2.0), (1.0, 1.0), (2.0, 8.0)] {
            let slow = doc_constant_intensity(i, t, &p);
            let fast = doc_constant_intensity(4.0 * i, t / 4.0, &p);
            assert!(
                fast < slow,
                "equal dose should cure less at higher intensity: {fast} vs {slow}"
            );
        }
    }

    #[test]
    fn induction_delays_curing_exactly() {
        let mut p = params();
        p.inhibitor_budget_sqrt_w_cm2_s = 0.6;
        let i = 0.81;
        let t_ind = induction_time(i, &p);
        assert!((t_ind - 0.6 / (p.quantum_yield * i).sqrt()).abs() < 1e-12);
        // exactly zero up to the induction time
        for f in [0.1, 0.5, 0.99, 1.0] {
            assert_eq!(doc_constant_intensity(i, f * t_ind, &p), 0.0);
        }
        assert!(doc_constant_intensity(i, 1.01 * t_ind, &p) > 0.0);
        // zero intensity never cures
        assert_eq!(doc_constant_intensity(0.0, 1e9, &p), 0.0);
    }

    // Oracle: RK4 integration of d[M]/dt = -Rp([M]) past the induction time.
    fn doc_by_integration(intensity: f64, time: f64, p: &ResinParams, steps: usize) -> f64 {
        let t0 = induction_time(intensity, p);
        if time <= t0 {
            return 0.0;
        }
        let h = (time - t0) / steps as f64;
        let mut m = p.initial_monomer_mol_per_l;
        let f = |m: f64| -propagation_rate(intensity, m, p);
        for _ in 0..steps {
            let k1 = f(m);
            let k2 = f(m + 0.5 * h * k1);
            let k3 = f(m + 0.5 * h * k2);
            let k4 = f(m + h * k3);
            m += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        1.0 - m / p.initial_monomer_mol_per_l
    }

    #[test]
    fn closed_form_matches_integrated_kinetics() {
        let mut p = params();
        p.inhibitor_budget_sqrt_w_cm2_s = 0.25;
        for (i, t) in [(0.5, 1.0), (1.0, 3.0), (2.0, 0.75), (0.1, 12.0)] {
            let closed = doc_constant_intensity(i, t, &p);
            let integrated = doc_by_integration(i, t, &p, 2000);
            let rel = (closed - integrated).abs() / integrated.max(1e-30);
            assert!(
                rel < 1e-6,
                "I={i}, t={t}: closed {closed} vs integrated {integrated}"
            );
        }
    }

    #[test]
    fn dose_matrix_monotone_cured_region() {
        let p = params();
        let intensities: Vec<f64> = (0..6).map(|i| 0.2 * i as f64).collect();
        let times: Vec<f64> = (0..6).map(|i| 0.3 * i as f64).collect();
        let grid = dose_matrix(&intensities, &times, &p).unwrap();

        // all-zero time column stays uncured
        for row in &grid {
            assert!(!row[0]);
        }
        // cured region is upward closed in both axes
        for i in 0..6 {
            for j in 0..6 {
                if grid[i][j] {
                    if i + 1 < 6 {
                        assert!(grid[i + 1][j]);
                    }
                    if j + 1 < 6 {
                        assert!(grid[i][j + 1]);
                    }
                }
            }
        }

        let zeros = dose_matrix(&intensities, &[0.0, 0.0], &p).unwrap();
        assert!(zeros.iter().all(|row| row.iter().all(|&c| !c)));

        assert!(dose_matrix(&[], &times, &p).is_err());
    }

    #[test]
    fn cure_boundary_crosses_iso_dose() {
        // two cells with the same I*t dose on either side of the gel boundary
        let p = ResinParams {
            kp_over_sqrt_kt_per_s_sqrt_cm2_per_w: 0.5,
            quantum_yield: 1.0,
            initial_monomer_mol_per_l: 4.0,
            gel_point_doc: 0.5,
            inhibitor_budget_sqrt_w_cm2_s: 0.0,
        };
        // dose I*t = 4 in both cases: DOC 0.86 vs 0.39 across the gel point
        let slow = doc_constant_intensity(1.0, 4.0, &p); // exponent 2.0
        let fast = doc_constant_intensity(16.0, 0.25, &p); // exponent 0.5
        assert!(slow >= p.gel_point_doc);
        assert!(fast < p.gel_point_doc);
    }

    #[test]
    fn develop_inclusive_at_gel_point() {
        let doc = Image2D::from_fn(2, ImageKind::ContinuousCure, |_, _| 0.1).unwrap();
        let cured = develop(&doc, 0.1).unwrap();
        assert!(cured.as_slice().iter().all(|&v| v == 1.0));

        let zero = Image2D::zeros(2, ImageKind::ContinuousCure);
        let washed = develop(&zero, 0.1).unwrap();
        assert!(washed.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn params_json_round_trip_rejects_unknown_keys() {
        let p = params();
        let text = serde_json::to_string_pretty(&p).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("resin.json");
        std::fs::write(&path, &text).unwrap();
        assert_eq!(ResinParams::load_json(&path).unwrap(), p);

        let bad = text.replace(
            "\"quantum_yield\"",
            "\"not_a_field\": 1.0, \"quantum_yield\"",
        );
        std::fs::write(&path, bad).unwrap();
        assert!(ResinParams::load_json(&path).is_err());
    }
}
