//! Tomographic projection synthesis for volumetric stereolithography.
//!
//! The library computes positive, quantized angular projection sets whose
//! accumulated optical dose, after a resin development model, reproduces a
//! target geometry. It covers the forward Radon transform and filtered
//! backprojection, positivity heuristics, the projected-gradient projection
//! optimizer, photopolymerization kinetics, z-slice frame assembly for a
//! rotating-vial printer, and sizing formulas for a microlens lightfield
//! projector.

pub mod calibration;
pub mod error;
pub mod grid;
pub mod image;
pub mod lightfield;
pub mod optimize;
pub mod positivity;
pub mod resin;
pub mod sinogram;
pub mod transform;
pub mod volume;

pub use calibration::CalibrationCurve;
pub use error::{Error, Result};
pub use grid::{angular_spacing, recommended_angle_count, AngleGrid};
pub use image::{binarize, load_image, save_png_normalized, Image2D, ImageKind};
pub use sinogram::{Sinogram, SinogramDomain};
pub use transform::{
    apply_filter, backproject, fbp_reconstruct, fourier_slice_check, radon, FilterKind, FilterSpec,
};
