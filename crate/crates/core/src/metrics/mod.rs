//! Reconstruction quality: pixel metrics and structure scores on extracted
//! transition lines (Canny edges and Frangi ridges).

mod binary;
mod canny;
mod filters;
mod frangi;
mod pixel;

use serde::{Deserialize, Serialize};

use crate::{Error, Field, Result};

pub use binary::{
    dilate, directed_hausdorff, f1, hausdorff, iou, overlay_to_field, ridge_overlay,
    squared_distance_transform, BinaryFeatureMap, FeatureSource, OverlayClass, OVERLAY_MATCHED,
    OVERLAY_MISSED, OVERLAY_SPURIOUS,
};
pub use canny::{canny_edges, CANNY_HIGH_PERCENTILE, CANNY_LOW_PERCENTILE, CANNY_SIGMA};
pub use filters::{gaussian_blur, hessian, sobel};
pub use frangi::{frangi_response, frangi_ridges, FRANGI_BETA, FRANGI_C_FRACTION, FRANGI_SIGMAS};
pub use pixel::{mse, psnr, rnmse, ssim, PSNR_CAP_DB, SSIM_K1, SSIM_K2, SSIM_SIGMA, SSIM_WINDOW};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MetricConfig {
    /// Matching radius for F1 and overlays, in pixels.
    pub f1_tolerance: f64,
    pub data_range: f64,
}

impl Default for MetricConfig {
    fn default() -> Self {
        Self {
            f1_tolerance: 1.0,
            data_range: 1.0,
        }
    }
}

/// Every score for one reconstruction. A metric that is undefined for the
/// pair (constant truth, empty feature map, tiny image) is `None`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricReport {
    pub rnmse: Option<f64>,
    pub psnr: Option<f64>,
    pub ssim: Option<f64>,
    pub iou_ridge: Option<f64>,
    pub f1_ridge: Option<f64>,
    pub hausdorff_ridge: Option<f64>,
    pub iou_edge: Option<f64>,
    pub f1_edge: Option<f64>,
    pub hausdorff_edge: Option<f64>,
}

impl MetricReport {
    pub const COLUMNS: [&'static str; 9] = [
        "rnmse",
        "psnr",
        "ssim",
        "iou_ridge",
        "f1_ridge",
        "hausdorff_ridge",
        "iou_edge",
        "f1_edge",
        "hausdorff_edge",
    ];

    /// Values in [`MetricReport::COLUMNS`] order.
    pub fn values(&self) -> [Option<f64>; 9] {
        [
            self.rnmse,
            self.psnr,
            self.ssim,
            self.iou_ridge,
            self.f1_ridge,
            self.hausdorff_ridge,
            self.iou_edge,
            self.f1_edge,
            self.hausdorff_edge,
        ]
    }
}

fn soft(r: Result<f64>) -> Result<Option<f64>> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(Error::Degenerate(_)) => Ok(None),
        Err(Error::Shape(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Scores `pred` against `truth`. Fails only on mismatched shapes or
/// non-finite input.
pub fn evaluate(pred: &Field, truth: &Field, config: &MetricConfig) -> Result<MetricReport> {
    if pred.dim() != truth.dim() {
        return Err(Error::Shape(format!("{:?} vs {:?}", pred.dim(), truth.dim())));
    }
    if pred.iter().chain(truth.iter()).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("metric input".into()));
    }
    let ridges = (frangi_ridges(pred), frangi_ridges(truth));
    let edges = (canny_edges(pred), canny_edges(truth));
    Ok(MetricReport {
        rnmse: soft(rnmse(pred, truth))?,
        psnr: Some(psnr(pred, truth, config.data_range)?),
        ssim: soft(ssim(pred, truth))?,
        iou_ridge: Some(iou(&ridges.0, &ridges.1)?),
        f1_ridge: Some(f1(&ridges.0, &ridges.1, config.f1_tolerance)?),
        hausdorff_ridge: soft(hausdorff(&ridges.0, &ridges.1))?,
        iou_edge: Some(iou(&edges.0, &edges.1)?),
        f1_edge: Some(f1(&edges.0, &edges.1, config.f1_tolerance)?),
        hausdorff_edge: soft(hausdorff(&edges.0, &edges.1))?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{synthesize_csd, SyntheticConfig};

    #[test]
    fn identical_images_score_perfectly() {
        let s = synthesize_csd(&SyntheticConfig {
            size: 64,
            seed: 2,
            ..Default::default()
        })
        .unwrap();
        let x = s.csd.to_field();
        let r = evaluate(&x, &x, &MetricConfig::default()).unwrap();
        assert_eq!(r.rnmse, Some(0.0));
        assert_eq!(r.psnr, Some(PSNR_CAP_DB));
        assert!((r.ssim.unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(r.iou_ridge, Some(1.0));
        assert_eq!(r.f1_ridge, Some(1.0));
        assert_eq!(r.hausdorff_ridge, Some(0.0));
        assert_eq!(r.iou_edge, Some(1.0));
        assert_eq!(r.hausdorff_edge, Some(0.0));
    }

    #[test]
    fn constant_truth_leaves_gaps() {
        let t = Field::from_elem((16, 16), 0.5);
        let p = Field::from_shape_fn((16, 16), |(i, _)| i as f64 / 15.0);
        let r = evaluate(&p, &t, &MetricConfig::default()).unwrap();
        assert_eq!(r.rnmse, None);
        assert_eq!(r.hausdorff_edge, None);
        assert!(r.psnr.is_some());
        assert!(evaluate(&p, &Field::zeros((8, 8)), &MetricConfig::default()).is_err());
    }

    #[test]
    fn frangi_covers_generator_lines() {
        for seed in 0..3 {
            let s = synthesize_csd(&SyntheticConfig {
                noise_sigma: 0.0,
                seed,
                ..Default::default()
            })
            .unwrap();
            let ridges = frangi_ridges(&s.csd.to_field());
            let near = dilate(&ridges.bits, 2.0);
            let total = s.line_raster.iter().filter(|&&b| b).count();
            let hit = s
                .line_raster
                .iter()
                .zip(near.iter())
                .filter(|(&t, &n)| t && n)
                .count();
            assert!(hit as f64 >= 0.95 * total as f64, "seed {seed}: {hit}/{total}");
        }
    }
}
