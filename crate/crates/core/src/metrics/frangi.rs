use super::binary::{BinaryFeatureMap, FeatureSource};
use super::filters::{gaussian_blur, hessian};
use crate::Field;

pub const FRANGI_SIGMAS: [f64; 3] = [1.0, 1.5, 2.0];
pub const FRANGI_BETA: f64 = 0.5;
/// `c` as a fraction of the largest Hessian norm at each scale.
pub const FRANGI_C_FRACTION: f64 = 0.5;
const OTSU_BINS: usize = 256;

/// Multiscale vesselness for bright ridges (negative principal curvature).
pub fn frangi_response(image: &Field) -> Field {
    let (h, w) = image.dim();
    let mut best = Field::zeros((h, w));
    let lo = image.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = image.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    // curvature at rounding level is treated as flat
    let floor = 1e-9 * (hi - lo);
    for &sigma in &FRANGI_SIGMAS {
        let (hxx, hxy, hyy) = hessian(&gaussian_blur(image, sigma));
        let s2 = sigma * sigma;
        let mut eig = Vec::with_capacity(h * w);
        let mut max_s = 0.0f64;
        for ((a, b), c) in hxx.iter().zip(hxy.iter()).zip(hyy.iter()) {
            let (a, b, c) = (a * s2, b * s2, c * s2);
            let half_tr = 0.5 * (a + c);
            let disc = (0.25 * (a - c) * (a - c) + b * b).sqrt();
            let (e1, e2) = (half_tr + disc, half_tr - disc);
            let (l1, l2) = if e1.abs() <= e2.abs() { (e1, e2) } else { (e2, e1) };
            max_s = max_s.max(l1.hypot(l2));
            eig.push((l1, l2));
        }
        if !(max_s > floor) {
            continue;
        }
        let c = FRANGI_C_FRACTION * max_s;
        for (v, &(l1, l2)) in best.iter_mut().zip(&eig) {
            if l2 >= 0.0 {
                continue;
            }
            let rb = l1 / l2;
            let s = l1.hypot(l2);
            let r = (-rb * rb / (2.0 * FRANGI_BETA * FRANGI_BETA)).exp()
                * (1.0 - (-s * s / (2.0 * c * c)).exp());
            if r > *v {
                *v = r;
            }
        }
    }
    best
}

/// Otsu threshold over a 256-bin histogram of `values`; returns the upper
/// edge of the last bin of the lower class.
pub(crate) fn otsu_threshold(values: &[f64]) -> f64 {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return lo;
    }
    let width = (hi - lo) / OTSU_BINS as f64;
    let mut hist = [0usize; OTSU_BINS];
    for &v in values {
        let b = (((v - lo) / width) as usize).min(OTSU_BINS - 1);
        hist[b] += 1;
    }
    let total = values.len() as f64;
    let centre = |b: usize| lo + (b as f64 + 0.5) * width;
    let sum_all: f64 = (0..OTSU_BINS).map(|b| hist[b] as f64 * centre(b)).sum();
    let (mut w0, mut sum0) = (0.0, 0.0);
    let (mut best_b, mut best_var) = (0, f64::NEG_INFINITY);
    for (b, &count) in hist.iter().enumerate().take(OTSU_BINS - 1) {
        w0 += count as f64;
        sum0 += count as f64 * centre(b);
        let w1 = total - w0;
        if w0 == 0.0 || w1 == 0.0 {
            continue;
        }
        let m0 = sum0 / w0;
        let m1 = (sum_all - sum0) / w1;
        let var = w0 * w1 * (m0 - m1) * (m0 - m1);
        if var > best_var {
            best_var = var;
            best_b = b;
        }
    }
    lo + (best_b + 1) as f64 * width
}

/// Binary ridge map: vesselness above the Otsu threshold of its nonzero
/// values.
pub fn frangi_ridges(image: &Field) -> BinaryFeatureMap {
    let v = frangi_response(image);
    let nonzero: Vec<f64> = v.iter().copied().filter(|&x| x > 0.0).collect();
    if nonzero.is_empty() {
        return BinaryFeatureMap::new(v.mapv(|_| false), FeatureSource::Frangi);
    }
    let t = otsu_threshold(&nonzero);
    let single = nonzero.iter().all(|&x| x == nonzero[0]);
    BinaryFeatureMap::new(
        v.mapv(|x| x > 0.0 && (x > t || single)),
        FeatureSource::Frangi,
    )
}
