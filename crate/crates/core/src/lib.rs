#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! Reconstruction of quantum-dot charge stability diagrams (CSDs) from sparse
//! measurements.
//!
//! The crate bundles everything needed to benchmark a small conditional
//! diffusion model against classical interpolation:
//!
//! * [`numerics`]: the handful of differentiable layers the U-Net needs, with
//!   hand-written backward passes and an Adam optimizer.
//! * [`data`]: the CSD container, the `CSD1` file format, CSV import,
//!   dataset splits and a synthetic double-dot generator.
//! * [`masking`]: grid and line-cut measurement masks.
//! * [`diffusion`]: noise schedule, conditional U-Net denoiser, training and
//!   reverse-process reconstruction.
//! * [`baselines`]: linear (Delaunay), inverse-distance and biharmonic
//!   interpolation.
//! * [`metrics`]: RNMSE/PSNR/SSIM plus Canny/Frangi transition-line
//!   extraction and IoU/F1/Hausdorff comparison.
//! * [`harness`]: experiment sweeps, the measurement-time model and CSV
//!   reporting.

pub mod baselines;
pub mod data;
pub mod diffusion;
mod error;
pub mod harness;
pub mod masking;
pub mod metrics;
pub mod numerics;
pub mod rng;

pub use error::{Error, Result};

/// A 2-D scalar field, indexed `[row, col]`.
pub type Field = ndarray::Array2<f64>;
