use ndarray::Array2;

use super::binary::{BinaryFeatureMap, FeatureSource};
use super::filters::{gaussian_blur, sobel};
use crate::Field;

pub const CANNY_SIGMA: f64 = 1.5;
pub const CANNY_LOW_PERCENTILE: f64 = 70.0;
pub const CANNY_HIGH_PERCENTILE: f64 = 90.0;

/// Linear-interpolated percentile of unsorted values, `q` in `[0, 100]`.
pub(crate) fn percentile(values: &mut [f64], q: f64) -> f64 {
    values.sort_by(f64::total_cmp);
    let pos = q / 100.0 * (values.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    values[lo] + (pos - lo as f64) * (values[hi] - values[lo])
}

/// Canny edge map with thresholds at fixed percentiles of the nonzero
/// gradient magnitudes.
pub fn canny_edges(image: &Field) -> BinaryFeatureMap {
    let (h, w) = image.dim();
    let smooth = gaussian_blur(image, CANNY_SIGMA);
    let (gx, gy) = sobel(&smooth);
    let mag = Field::from_shape_fn((h, w), |ix| gx[ix].hypot(gy[ix]));
    let max = mag.iter().copied().fold(0.0, f64::max);
    let empty = BinaryFeatureMap::new(Array2::from_elem((h, w), false), FeatureSource::Canny);
    if !(max > 0.0) {
        return empty;
    }
    let tol = 1e-6 * max;

    // non-maximum suppression along the gradient direction, folded to [0, π)
    let mut thin = Field::zeros((h, w));
    for i in 0..h {
        for j in 0..w {
            let m = mag[[i, j]];
            if m <= tol {
                continue;
            }
            let mut angle = gy[[i, j]].atan2(gx[[i, j]]).to_degrees();
            if angle < 0.0 {
                angle += 180.0;
            }
            let (di, dj): (isize, isize) = if !(22.5..157.5).contains(&angle) {
                (0, 1)
            } else if angle < 67.5 {
                (1, 1)
            } else if angle < 112.5 {
                (1, 0)
            } else {
                (1, -1)
            };
            let get = |si: isize, sj: isize| -> f64 {
                let (a, b) = (i as isize + si, j as isize + sj);
                if a < 0 || b < 0 || a >= h as isize || b >= w as isize {
                    0.0
                } else {
                    mag[[a as usize, b as usize]]
                }
            };
            let next = get(di, dj);
            let prev = get(-di, -dj);
            // ties go to the pixel on the +direction side
            if m >= prev - tol && m > next + tol {
                thin[[i, j]] = m;
            }
        }
    }

    let mut nonzero: Vec<f64> = mag.iter().copied().filter(|&v| v > tol).collect();
    let low = percentile(&mut nonzero, CANNY_LOW_PERCENTILE);
    let high = percentile(&mut nonzero, CANNY_HIGH_PERCENTILE);

    let mut out = empty.bits;
    let mut stack: Vec<(usize, usize)> = Vec::new();
    for ((i, j), &v) in thin.indexed_iter() {
        if v > 0.0 && v >= high - tol {
            out[[i, j]] = true;
            stack.push((i, j));
        }
    }
    while let Some((i, j)) = stack.pop() {
        for di in -1isize..=1 {
            for dj in -1isize..=1 {
                let (a, b) = (i as isize + di, j as isize + dj);
                if a < 0 || b < 0 || a >= h as isize || b >= w as isize {
                    continue;
                }
                let (a, b) = (a as usize, b as usize);
                let v = thin[[a, b]];
                if !out[[a, b]] && v > 0.0 && v >= low - tol {
                    out[[a, b]] = true;
                    stack.push((a, b));
                }
            }
        }
    }
    BinaryFeatureMap::new(out, FeatureSource::Canny)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn percentile_interpolates() {
        let mut v = vec![4.0, 1.0, 3.0, 2.0, 5.0];
        assert_eq!(percentile(&mut v, 50.0), 3.0);
        assert_eq!(percentile(&mut v, 75.0), 4.0);
        assert_eq!(percentile(&mut v, 90.0), 4.6);
        assert_eq!(percentile(&mut [7.0], 30.0), 7.0);
    }

    #[test]
    fn constant_image_has_no_edges() {
        assert!(canny_edges(&Field::from_elem((20, 20), 0.4)).is_empty());
    }

    fn step(h: usize, w: usize, at: usize) -> Field {
        Field::from_shape_fn((h, w), |(_, j)| if j < at { 0.2 } else { 0.8 })
    }

    #[test]
    fn vertical_step_gives_one_pixel_line() {
        let e = canny_edges(&step(32, 32, 16));
        let cols: Vec<usize> = (0..32)
            .filter(|&j| (0..32).any(|i| e.bits[[i, j]]))
            .collect();
        assert_eq!(cols.len(), 1, "edge columns {cols:?}");
        let c = cols[0];
        assert!(c == 15 || c == 16);
        let marked = (0..32).filter(|&i| e.bits[[i, c]]).count();
        assert!(marked as f64 >= 0.95 * 32.0);
    }

    #[test]
    fn invariant_under_affine_intensity() {
        let img = Field::from_shape_fn((32, 32), |(i, j)| {
            let r = ((i as f64 - 15.0).powi(2) + (j as f64 - 12.0).powi(2)).sqrt();
            if r < 8.0 { 0.9 } else { 0.1 + 0.005 * j as f64 }
        });
        let base = canny_edges(&img);
        assert!(!base.is_empty());
        for (a, b) in [(2.0, 0.3), (0.5, -0.1), (-1.0, 1.0)] {
            assert_eq!(canny_edges(&img.mapv(|v| a * v + b)).bits, base.bits);
        }
    }
}
