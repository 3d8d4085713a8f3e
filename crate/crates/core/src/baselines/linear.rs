use delaunator::{triangulate, Point};

use super::check_inputs;
use super::knn::MeasuredIndex;
use crate::masking::MeasurementMask;
use crate::{Error, Field, Result};

/// Piecewise-linear interpolation over a Delaunay triangulation of the
/// measured pixels; pixels outside the hull take the nearest measured value.
pub fn interp_linear(y: &Field, mask: &MeasurementMask) -> Result<Field> {
    check_inputs(y, mask)?;
    let (h, w) = y.dim();
    let pts: Vec<(usize, usize)> = mask
        .bits()
        .indexed_iter()
        .filter(|(_, &b)| b)
        .map(|(p, _)| p)
        .collect();
    let coords: Vec<Point> = pts
        .iter()
        .map(|&(i, j)| Point {
            x: j as f64,
            y: i as f64,
        })
        .collect();
    let tri = triangulate(&coords);
    if tri.triangles.is_empty() {
        return Err(Error::Degenerate(format!(
            "linear interpolation needs 3 non-collinear measured points, have {}",
            pts.len()
        )));
    }

    let mut out = y.clone();
    let mut filled = mask.bits().clone();
    for t in tri.triangles.chunks_exact(3) {
        let [a, b, c] = [pts[t[0]], pts[t[1]], pts[t[2]]];
        let (ai, aj) = (a.0 as f64, a.1 as f64);
        let (bi, bj) = (b.0 as f64 - ai, b.1 as f64 - aj);
        let (ci, cj) = (c.0 as f64 - ai, c.1 as f64 - aj);
        let det = bi * cj - bj * ci;
        if det == 0.0 {
            continue;
        }
        let tol = 1e-9;
        let (va, vb, vc) = (y[[a.0, a.1]], y[[b.0, b.1]], y[[c.0, c.1]]);
        let i_range = a.0.min(b.0).min(c.0)..=a.0.max(b.0).max(c.0);
        let j_range = a.1.min(b.1).min(c.1)..=a.1.max(b.1).max(c.1);
        for i in i_range {
            for j in j_range.clone() {
                if filled[[i, j]] {
                    continue;
                }
                let (pi, pj) = (i as f64 - ai, j as f64 - aj);
                let lb = (pi * cj - pj * ci) / det;
                let lc = (bi * pj - bj * pi) / det;
                let la = 1.0 - lb - lc;
                if la < -tol || lb < -tol || lc < -tol {
                    continue;
                }
                let (lb, lc) = (lb.max(0.0), lc.max(0.0));
                let s = la.max(0.0) + lb + lc;
                out[[i, j]] = va + (lb / s) * (vb - va) + (lc / s) * (vc - va);
                filled[[i, j]] = true;
            }
        }
    }

    if filled.iter().any(|&f| !f) {
        let index = MeasuredIndex::new(mask);
        let mut nb = Vec::with_capacity(1);
        for i in 0..h {
            for j in 0..w {
                if !filled[[i, j]] {
                    index.nearest(i, j, 1, &mut nb);
                    let p = nb[0].1;
                    out[[i, j]] = y[[p / w, p % w]];
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::masking::{apply_mask, MaskSpec};
    use ndarray::Array2;
    use proptest::prelude::*;

    fn plane(h: usize, w: usize, a: f64, b: f64, c: f64) -> Field {
        Field::from_shape_fn((h, w), |(i, j)| a * i as f64 + b * j as f64 + c)
    }

    #[test]
    fn affine_exact_inside_hull() {
        let x = plane(33, 33, 0.01, -0.02, 0.4);
        for n in [2, 4, 8] {
            let mask = MaskSpec::grid(n).build(33, 33).unwrap();
            let out = interp_linear(&apply_mask(&x, &mask).unwrap(), &mask).unwrap();
            for (a, b) in out.iter().zip(x.iter()) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn collinear_rejected() {
        let mut bits = Array2::from_elem((5, 5), false);
        for j in 0..5 {
            bits[[2, j]] = true;
        }
        let mask = MeasurementMask::from_bits(bits, MaskSpec::grid(1)).unwrap();
        assert!(matches!(
            interp_linear(&Field::zeros((5, 5)), &mask),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn outside_hull_takes_nearest() {
        // grid 5 on 12x12 leaves columns and rows 11 outside the hull
        let mask = MaskSpec::grid(5).build(12, 12).unwrap();
        let x = Field::from_shape_fn((12, 12), |(i, j)| (i * 12 + j) as f64);
        let out = interp_linear(&apply_mask(&x, &mask).unwrap(), &mask).unwrap();
        assert_eq!(out[[11, 11]], x[[10, 10]]);
        assert_eq!(out[[0, 11]], x[[0, 10]]);
    }

    #[test]
    fn constant_exact() {
        let mask = MaskSpec::line_cut(4, 4, 4, 4).build(32, 32).unwrap();
        let x = Field::from_elem((32, 32), 0.3);
        assert_eq!(interp_linear(&apply_mask(&x, &mask).unwrap(), &mask).unwrap(), x);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn bounded_by_measurements(vals in proptest::collection::vec(-5.0f64..5.0, 24 * 24), n in 2usize..6) {
            let x = Field::from_shape_vec((24, 24), vals).unwrap();
            let mask = MaskSpec::grid(n).build(24, 24).unwrap();
            let y = apply_mask(&x, &mask).unwrap();
            let out = interp_linear(&y, &mask).unwrap();
            let measured: Vec<f64> = mask.bits().iter().zip(y.iter()).filter(|(b, _)| **b).map(|(_, v)| *v).collect();
            let lo = measured.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = measured.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(out.iter().all(|&v| v >= lo - 1e-12 && v <= hi + 1e-12));
        }
    }
}
