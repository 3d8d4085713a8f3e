use super::filters::gaussian_kernel;
use crate::{Error, Field, Result};

/// Reported PSNR for identical images (and the cap for near-identical ones).
pub const PSNR_CAP_DB: f64 = 100.0;

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;

fn same_shape(a: &Field, b: &Field) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::Shape(format!("{:?} vs {:?}", a.dim(), b.dim())));
    }
    if a.is_empty() {
        return Err(Error::Shape("empty image".into()));
    }
    Ok(())
}

pub fn mse(pred: &Field, truth: &Field) -> Result<f64> {
    same_shape(pred, truth)?;
    let s: f64 = pred.iter().zip(truth.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(s / pred.len() as f64)
}

/// RMSE divided by the population standard deviation of `truth`.
pub fn rnmse(pred: &Field, truth: &Field) -> Result<f64> {
    let err = mse(pred, truth)?.sqrt();
    let n = truth.len() as f64;
    let mean = truth.sum() / n;
    let std = (truth.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt();
    if std == 0.0 {
        return Err(Error::Degenerate("rnmse of a constant ground truth".into()));
    }
    Ok(err / std)
}

/// `10·log10(range²/MSE)`, capped at [`PSNR_CAP_DB`].
pub fn psnr(pred: &Field, truth: &Field, range: f64) -> Result<f64> {
    let m = mse(pred, truth)?;
    if m == 0.0 {
        return Ok(PSNR_CAP_DB);
    }
    Ok((10.0 * (range * range / m).log10()).min(PSNR_CAP_DB))
}

/// Valid-mode separable correlation.
fn valid_filter(f: &Field, k: &[f64]) -> Field {
    let (h, w) = f.dim();
    let n = k.len();
    let (oh, ow) = (h + 1 - n, w + 1 - n);
    let mut tmp = Field::zeros((h, ow));
    for i in 0..h {
        for j in 0..ow {
            tmp[[i, j]] = (0..n).map(|t| k[t] * f[[i, j + t]]).sum();
        }
    }
    let mut out = Field::zeros((oh, ow));
    for i in 0..oh {
        for j in 0..ow {
            out[[i, j]] = (0..n).map(|t| k[t] * tmp[[i + t, j]]).sum();
        }
    }
    out
}

/// Mean SSIM over every 11×11 Gaussian window lying inside the frame,
/// data range 1.
pub fn ssim(a: &Field, b: &Field) -> Result<f64> {
    same_shape(a, b)?;
    let (h, w) = a.dim();
    if h < SSIM_WINDOW || w < SSIM_WINDOW {
        return Err(Error::Shape(format!(
            "ssim needs at least {SSIM_WINDOW}x{SSIM_WINDOW}, got {h}x{w}"
        )));
    }
    let full = gaussian_kernel(SSIM_SIGMA);
    let cut = (full.len() - SSIM_WINDOW) / 2;
    let k: Vec<f64> = full[cut..cut + SSIM_WINDOW].to_vec();
    let s: f64 = k.iter().sum();
    let k: Vec<f64> = k.iter().map(|v| v / s).collect();

    let mu_a = valid_filter(a, &k);
    let mu_b = valid_filter(b, &k);
    let aa = valid_filter(&(a * a), &k);
    let bb = valid_filter(&(b * b), &k);
    let ab = valid_filter(&(a * b), &k);
    let c1 = SSIM_K1 * SSIM_K1;
    let c2 = SSIM_K2 * SSIM_K2;
    let mut total = 0.0;
    for idx in 0..mu_a.len() {
        let (ma, mb) = (mu_a.as_slice().unwrap()[idx], mu_b.as_slice().unwrap()[idx]);
        let va = aa.as_slice().unwrap()[idx] - ma * ma;
        let vb = bb.as_slice().unwrap()[idx] - mb * mb;
        let cov = ab.as_slice().unwrap()[idx] - ma * mb;
        total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
    }
    Ok(total / mu_a.len() as f64)
}
