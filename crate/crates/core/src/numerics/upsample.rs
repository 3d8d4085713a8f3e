use crate::{Error, Result};

use super::{Scalar, Tensor};

/// Source taps for one output coordinate along an axis of length `n`.
#[derive(Clone, Copy)]
struct Tap<F> {
    lo: usize,
    hi: usize,
    w_lo: F,
    w_hi: F,
}

/// Half-pixel-centre sampling: output `o` reads source `(o + 0.5)/2 - 0.5`,
/// clamped to `[0, n-1]`.
fn taps<F: Scalar>(n: usize) -> Vec<Tap<F>> {
    (0..2 * n)
        .map(|o| {
            let src = ((o as f64 + 0.5) / 2.0 - 0.5).clamp(0.0, (n - 1) as f64);
            let lo = src.floor() as usize;
            let hi = (lo + 1).min(n - 1);
            let frac = src - lo as f64;
            Tap {
                lo,
                hi,
                w_lo: F::lit(1.0 - frac),
                w_hi: F::lit(frac),
            }
        })
        .collect()
}

/// Bilinear 2× upsampling (align-corners false, border clamp).
pub fn bilinear_upsample2x<F: Scalar>(input: &Tensor<F>) -> Tensor<F> {
    let (c, h, w) = input.shape();
    let mut out = Tensor::zeros(c, 2 * h, 2 * w);
    if h == 0 || w == 0 {
        return out;
    }
    let rows = taps::<F>(h);
    let cols = taps::<F>(w);
    for ch in 0..c {
        let src = input.plane(ch);
        let dst = out.plane_mut(ch);
        for (oi, r) in rows.iter().enumerate() {
            let top = &src[r.lo * w..][..w];
            let bot = &src[r.hi * w..][..w];
            let line = &mut dst[oi * 2 * w..][..2 * w];
            for (oj, t) in cols.iter().enumerate() {
                let a = top[t.lo] * t.w_lo + top[t.hi] * t.w_hi;
                let b = bot[t.lo] * t.w_lo + bot[t.hi] * t.w_hi;
                line[oj] = a * r.w_lo + b * r.w_hi;
            }
        }
    }
    out
}

/// Adjoint of [`bilinear_upsample2x`]: scatters each output gradient back to
/// its four source taps.
pub fn bilinear_upsample2x_backward<F: Scalar>(
    input_shape: (usize, usize, usize),
    output_grad: &Tensor<F>,
) -> Result<Tensor<F>> {
    let (c, h, w) = input_shape;
    if output_grad.shape() != (c, 2 * h, 2 * w) {
        return Err(Error::Shape(format!(
            "upsample backward: grad {:?} for input {:?}",
            output_grad.shape(),
            input_shape
        )));
    }
    let mut grad = Tensor::zeros(c, h, w);
    if h == 0 || w == 0 {
        return Ok(grad);
    }
    let rows = taps::<F>(h);
    let cols = taps::<F>(w);
    for ch in 0..c {
        let g = output_grad.plane(ch);
        let dst = grad.plane_mut(ch);
        for (oi, r) in rows.iter().enumerate() {
            let line = &g[oi * 2 * w..][..2 * w];
            for (oj, t) in cols.iter().enumerate() {
                let v = line[oj];
                let top = v * r.w_lo;
                let bot = v * r.w_hi;
                dst[r.lo * w + t.lo] += top * t.w_lo;
                dst[r.lo * w + t.hi] += top * t.w_hi;
                dst[r.hi * w + t.lo] += bot * t.w_lo;
                dst[r.hi * w + t.hi] += bot * t.w_hi;
            }
        }
    }
    Ok(grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::gradcheck::*;
    use crate::rng;

    #[test]
    fn constant_stays_constant() {
        let y = bilinear_upsample2x(&Tensor::filled(2, 3, 5, 0.4f64));
        assert_eq!(y.shape(), (2, 6, 10));
        assert!(y.data().iter().all(|&v| (v - 0.4).abs() < 1e-15));
    }

    #[test]
    fn single_pixel_clamps_to_border() {
        let y = bilinear_upsample2x(&Tensor::filled(1, 1, 1, 3.0f32));
        assert_eq!(y.data(), &[3.0; 4]);
    }

    #[test]
    fn two_by_two_matches_hand_evaluation() {
        // Source coordinates per output index: -0.25→0, 0.25, 0.75, 1.25→1,
        // so the value is 2·R(i) + R(j) with R = [0, 0.25, 0.75, 1].
        let x = Tensor::from_vec(1, 2, 2, vec![0.0f64, 1.0, 2.0, 3.0]).unwrap();
        let y = bilinear_upsample2x(&x);
        let want = [
            0.0, 0.25, 0.75, 1.0, //
            0.5, 0.75, 1.25, 1.5, //
            1.5, 1.75, 2.25, 2.5, //
            2.0, 2.25, 2.75, 3.0,
        ];
        for (g, w) in y.data().iter().zip(want) {
            assert!((g - w).abs() < 1e-12, "{g} vs {w}");
        }
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut r = rng::stream(31, "up-fd");
        let x = uniform_vec(&mut r, 2 * 3 * 4, -1.0, 1.0);
        let proj = uniform_vec(&mut r, 2 * 6 * 8, -1.0, 1.0);
        let g = bilinear_upsample2x_backward((2, 3, 4), &Tensor::from_vec(2, 6, 8, proj.clone()).unwrap())
            .unwrap();
        let loss = |v: &[f64]| {
            let t = Tensor::from_vec(2, 3, 4, v.to_vec()).unwrap();
            dot(bilinear_upsample2x(&t).data(), &proj)
        };
        assert!(max_rel_err(loss, &x, g.data()) < FD_REL_TOL);
    }
}
