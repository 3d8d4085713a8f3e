use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::{Error, Field, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeatureSource {
    Canny,
    Frangi,
    SyntheticTruth,
}

/// Binary transition-line map, `true` on line pixels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryFeatureMap {
    pub bits: Array2<bool>,
    pub source: FeatureSource,
}

impl BinaryFeatureMap {
    pub fn new(bits: Array2<bool>, source: FeatureSource) -> Self {
        Self { bits, source }
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    pub fn dim(&self) -> (usize, usize) {
        self.bits.dim()
    }
}

fn check(a: &Array2<bool>, b: &Array2<bool>) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::Shape(format!("feature maps {:?} vs {:?}", a.dim(), b.dim())));
    }
    Ok(())
}

/// Squared distance transform of a 1-D sampled function (lower envelope of
/// parabolas).
fn dt_1d(f: &[f64], out: &mut [f64]) {
    let n = f.len();
    let mut sites = (0..n).filter(|&q| f[q].is_finite());
    let Some(first) = sites.next() else {
        out.fill(f64::INFINITY);
        return;
    };
    let mut v = vec![first; n];
    let mut z = vec![f64::INFINITY; n + 1];
    z[0] = f64::NEG_INFINITY;
    let mut k = 0usize;
    for q in sites {
        loop {
            let p = v[k];
            let s = ((f[q] + (q * q) as f64) - (f[p] + (p * p) as f64)) / (2.0 * (q - p) as f64);
            if s <= z[k] {
                // z[0] is −∞, so this never pops the first parabola
                k -= 1;
                continue;
            }
            k += 1;
            v[k] = q;
            z[k] = s;
            z[k + 1] = f64::INFINITY;
            break;
        }
    }
    let mut k = 0;
    for (q, o) in out.iter_mut().enumerate() {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let d = q as f64 - v[k] as f64;
        *o = d * d + f[v[k]];
    }
}

/// Exact squared Euclidean distance from every pixel to the nearest set
/// pixel; infinite everywhere when the map is empty.
pub fn squared_distance_transform(bits: &Array2<bool>) -> Field {
    let (h, w) = bits.dim();
    let mut g = bits.mapv(|b| if b { 0.0 } else { f64::INFINITY });
    let mut col = vec![0.0; h];
    let mut out = vec![0.0; h.max(w)];
    for j in 0..w {
        for i in 0..h {
            col[i] = g[[i, j]];
        }
        dt_1d(&col, &mut out[..h]);
        for i in 0..h {
            g[[i, j]] = out[i];
        }
    }
    let mut row = vec![0.0; w];
    for i in 0..h {
        for j in 0..w {
            row[j] = g[[i, j]];
        }
        dt_1d(&row, &mut out[..w]);
        for j in 0..w {
            g[[i, j]] = out[j];
        }
    }
    g
}

/// Pixels within Euclidean distance `radius` of a set pixel.
pub fn dilate(bits: &Array2<bool>, radius: f64) -> Array2<bool> {
    if radius <= 0.0 {
        return bits.clone();
    }
    let r2 = radius * radius;
    squared_distance_transform(bits).mapv(|d| d <= r2)
}

/// `|a ∧ b| / |a ∨ b|`, 1 when both maps are empty.
pub fn iou(a: &BinaryFeatureMap, b: &BinaryFeatureMap) -> Result<f64> {
    check(&a.bits, &b.bits)?;
    let (mut inter, mut union) = (0usize, 0usize);
    for (&x, &y) in a.bits.iter().zip(b.bits.iter()) {
        inter += usize::from(x && y);
        union += usize::from(x || y);
    }
    Ok(if union == 0 { 1.0 } else { inter as f64 / union as f64 })
}

/// F1 with a matching tolerance of `tolerance` pixels: precision counts
/// predicted pixels near the truth, recall counts truth pixels near the
/// prediction. 1 when both are empty, 0 when exactly one is.
pub fn f1(pred: &BinaryFeatureMap, truth: &BinaryFeatureMap, tolerance: f64) -> Result<f64> {
    check(&pred.bits, &truth.bits)?;
    let (np, nt) = (pred.count(), truth.count());
    if np == 0 && nt == 0 {
        return Ok(1.0);
    }
    if np == 0 || nt == 0 {
        return Ok(0.0);
    }
    let near_truth = dilate(&truth.bits, tolerance);
    let near_pred = dilate(&pred.bits, tolerance);
    let tp_p = pred.bits.iter().zip(near_truth.iter()).filter(|(&p, &t)| p && t).count();
    let tp_r = truth.bits.iter().zip(near_pred.iter()).filter(|(&t, &p)| p && t).count();
    let precision = tp_p as f64 / np as f64;
    let recall = tp_r as f64 / nt as f64;
    if precision + recall == 0.0 {
        return Ok(0.0);
    }
    Ok(2.0 * precision * recall / (precision + recall))
}

/// Largest distance from a pixel of `a` to its nearest pixel of `b`.
pub fn directed_hausdorff(a: &BinaryFeatureMap, b: &BinaryFeatureMap) -> Result<f64> {
    check(&a.bits, &b.bits)?;
    if a.is_empty() || b.is_empty() {
        return Err(Error::Degenerate("hausdorff distance of an empty feature map".into()));
    }
    let dt = squared_distance_transform(&b.bits);
    let worst = a
        .bits
        .iter()
        .zip(dt.iter())
        .filter(|(&on, _)| on)
        .map(|(_, &d)| d)
        .fold(0.0, f64::max);
    Ok(worst.sqrt())
}

pub fn hausdorff(a: &BinaryFeatureMap, b: &BinaryFeatureMap) -> Result<f64> {
    Ok(directed_hausdorff(a, b)?.max(directed_hausdorff(b, a)?))
}

pub const OVERLAY_MATCHED: f64 = 1.0;
pub const OVERLAY_SPURIOUS: f64 = 2.0 / 3.0;
pub const OVERLAY_MISSED: f64 = 1.0 / 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OverlayClass {
    None,
    Matched,
    Spurious,
    Missed,
}

/// Per-pixel comparison of predicted and true line maps under a tolerance.
pub fn ridge_overlay(
    pred: &BinaryFeatureMap,
    truth: &BinaryFeatureMap,
    tolerance: f64,
) -> Result<Array2<OverlayClass>> {
    check(&pred.bits, &truth.bits)?;
    let near_truth = dilate(&truth.bits, tolerance);
    let near_pred = dilate(&pred.bits, tolerance);
    Ok(Array2::from_shape_fn(pred.dim(), |ix| {
        if pred.bits[ix] {
            if near_truth[ix] {
                OverlayClass::Matched
            } else {
                OverlayClass::Spurious
            }
        } else if truth.bits[ix] && !near_pred[ix] {
            OverlayClass::Missed
        } else {
            OverlayClass::None
        }
    }))
}

/// Grey-level encoding of an overlay for image export.
pub fn overlay_to_field(overlay: &Array2<OverlayClass>) -> Field {
    overlay.mapv(|c| match c {
        OverlayClass::None => 0.0,
        OverlayClass::Matched => OVERLAY_MATCHED,
        OverlayClass::Spurious => OVERLAY_SPURIOUS,
        OverlayClass::Missed => OVERLAY_MISSED,
    })
}
