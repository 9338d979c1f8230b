//! Positivity heuristics for filtered projection sets.
//!
//! Ramp-filtered backprojections carry negative ripples that a light source
//! cannot emit. Both heuristics return a non-negative projection set: the
//! offset shift preserves relative shape at the cost of a large constant
//! pedestal, while clamping preserves contrast at the cost of fidelity.

use crate::error::{Error, Result};
use crate::image::Image2D;
use crate::sinogram::Sinogram;

/// Shifts the whole set so the global minimum becomes exactly zero.
/// Already non-negative sets pass through unchanged.
pub fn offset_positive(sino: &Sinogram) -> Sinogram {
    let m = sino.min_value();
    if m >= 0.0 {
        sino.map(|v| v)
    } else {
        sino.map(|v| v - m)
    }
}

/// Entrywise max(value, 0).
pub fn clamp_negatives(sino: &Sinogram) -> Sinogram {
    sino.map(|v| v.max(0.0))
}

/// (mean_in - mean_out) / (mean_in + mean_out) of dose over the mask.
///
/// 1 means all dose lands inside the target, 0 means no separation.
pub fn dose_contrast(dose: &Image2D, mask: &Image2D) -> Result<f64> {
    if dose.width() != mask.width() || dose.height() != mask.height() {
        return Err(Error::DimensionMismatch {
            what: "dose_contrast images",
            expected: mask.width() * mask.height(),
            actual: dose.width() * dose.height(),
        });
    }
    let mut sum_in = 0.0;
    let mut n_in = 0usize;
    let mut sum_out = 0.0;
    let mut n_out = 0usize;
    for (&d, &m) in dose.as_slice().iter().zip(mask.as_slice()) {
        if m != 0.0 {
            sum_in += d;
            n_in += 1;
        } else {
            sum_out += d;
            n_out += 1;
        }
    }
    if n_in == 0 || n_out == 0 {
        return Err(Error::param(
            "mask",
            "contrast needs at least one pixel on each side of the mask",
        ));
    }
    let mean_in = sum_in / n_in as f64;
    let mean_out = sum_out / n_out as f64;
    let denom = mean_in + mean_out;
    if denom == 0.0 {
        return Ok(0.0);
    }
    Ok((mean_in - mean_out) / denom)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::AngleGrid;
    use crate::image::ImageKind;
    use crate::sinogram::SinogramDomain;
    use proptest::prelude::*;

    fn sino(data: Vec<f64>) -> Sinogram {
        let grid = AngleGrid::half_turn(2).unwrap();
        let n = data.len() / 2;
        Sinogram::new(n, grid, SinogramDomain::Real, data).unwrap()
    }

    #[test]
    fn offset_leaves_non_negative_unchanged() {
        let s = sino(vec![0.0, 1.0, 2.0, 3.0]);
        assert_eq!(offset_positive(&s).as_slice(), s.as_slice());
    }

    #[test]
    fn offset_shifts_min_to_zero() {
        let s = sino(vec![-2.0, 1.0, 0.0, 3.0]);
        let o = offset_positive(&s);
        assert_eq!(o.as_slice(), &[0.0, 3.0, 2.0, 5.0]);
        assert_eq!(o.min_value(), 0.0);
    }

    #[test]
    fn clamp_trivials() {
        let s = sino(vec![1.0, 0.5, 0.0, 2.0]);
        assert_eq!(clamp_negatives(&s).as_slice(), s.as_slice());

        let s = sino(vec![-1.0, -0.5, -3.0, -2.0]);
        assert_eq!(clamp_negatives(&s).as_slice(), &[0.0; 4]);

        let s = sino(vec![-1.0, 0.5, -3.0, 2.0]);
        let once = clamp_negatives(&s);
        let twice = clamp_negatives(&once);
        assert_eq!(once.as_slice(), twice.as_slice());
    }

    #[test]
    fn contrast_perfect_and_uniform() {
        let mask = Image2D::from_fn(4, ImageKind::TargetMask, |x, _| (x < 2) as u8 as f64).unwrap();
        let perfect = mask.with_kind(ImageKind::Dose).unwrap();
        assert_eq!(dose_contrast(&perfect, &mask).unwrap(), 1.0);

        let uniform = Image2D::from_fn(4, ImageKind::Dose, |_, _| 0.7).unwrap();
        assert!(dose_contrast(&uniform, &mask).unwrap().abs() < 1e-15);
    }

    #[test]
    fn contrast_rejects_degenerate_mask() {
        let all_in = Image2D::from_fn(4, ImageKind::TargetMask, |_, _| 1.0).unwrap();
        let dose = Image2D::from_fn(4, ImageKind::Dose, |_, _| 0.5).unwrap();
        assert!(dose_contrast(&dose, &all_in).is_err());
    }

    proptest! {
        // the shift preserves all pairwise differences
        #[test]
        fn offset_preserves_shape(data in proptest::collection::vec(-100.0f64..100.0, 4)) {
            let s = sino(data.clone());
            let o = offset_positive(&s);
            prop_assert!(o.min_value() >= 0.0);
            for i in 0..4 {
                for j in 0..4 {
                    let din = data[i] - data[j];
                    let dout = o.as_slice()[i] - o.as_slice()[j];
                    prop_assert!((din - dout).abs() < 1e-9);
                }
            }
        }

        #[test]
        fn clamp_never_increases(data in proptest::collection::vec(-100.0f64..100.0, 4)) {
            let s = sino(data.clone());
            let c = clamp_negatives(&s);
            prop_assert!(c.min_value() >= 0.0);
            for (before, after) in data.iter().zip(c.as_slice()) {
                prop_assert!(*after <= before.max(0.0) + 1e-15);
                prop_assert!(*after >= 0.0);
            }
        }
    }
}
