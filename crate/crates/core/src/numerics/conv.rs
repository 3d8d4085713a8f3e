use crate::{Error, Result};

use super::{LayerGrad, Scalar, Tensor};

/// Unfolds every 3×3 zero-padded neighbourhood into a column.
///
/// Row `c*9 + kh*3 + kw` of the result holds `input[c, i+kh-1, j+kw-1]` for
/// every output pixel `(i, j)`, so the weight tensor read row-major as a
/// `C_out × (C_in·9)` matrix multiplies it directly.
fn im2col<F: Scalar>(input: &Tensor<F>) -> Vec<F> {
    let (c_in, h, w) = input.shape();
    let hw = h * w;
    let mut cols = vec![F::zero(); c_in * 9 * hw];
    for c in 0..c_in {
        let src = input.plane(c);
        for kh in 0..3 {
            for kw in 0..3 {
                let row = &mut cols[((c * 9) + kh * 3 + kw) * hw..][..hw];
                for i in 0..h {
                    let si = i as isize + kh as isize - 1;
                    if si < 0 || si >= h as isize {
                        continue;
                    }
                    let src_row = &src[si as usize * w..][..w];
                    let dst_row = &mut row[i * w..][..w];
                    match kw {
                        0 => dst_row[1..].copy_from_slice(&src_row[..w - 1]),
                        1 => dst_row.copy_from_slice(src_row),
                        _ => dst_row[..w - 1].copy_from_slice(&src_row[1..]),
                    }
                }
            }
        }
    }
    cols
}

fn check_weights<F>(c_in: usize, weights: &[F], bias: &[F]) -> Result<usize> {
    let c_out = bias.len();
    if weights.len() != c_out * c_in * 9 {
        return Err(Error::Shape(format!(
            "conv3x3 weights hold {} values, expected {c_out}x{c_in}x3x3",
            weights.len()
        )));
    }
    Ok(c_out)
}

/// 3×3 cross-correlation with zero padding 1 and stride 1.
///
/// `weights` is `C_out × C_in × 3 × 3` row-major, `bias` has `C_out` entries.
pub fn conv3x3<F: Scalar>(input: &Tensor<F>, weights: &[F], bias: &[F]) -> Result<Tensor<F>> {
    let (c_in, h, w) = input.shape();
    let c_out = check_weights(c_in, weights, bias)?;
    let hw = h * w;
    let mut out = Tensor::zeros(c_out, h, w);
    if hw == 0 || c_out == 0 {
        return Ok(out);
    }
    for (c, &b) in bias.iter().enumerate() {
        out.plane_mut(c).fill(b);
    }
    let cols = im2col(input);
    let k = c_in * 9;
    F::gemm(
        c_out,
        k,
        hw,
        F::one(),
        weights,
        (k, 1),
        &cols,
        (hw, 1),
        F::one(),
        out.data_mut(),
        (hw, 1),
    );
    Ok(out)
}

/// Gradients of [`conv3x3`]; `param_grads = [weights, bias]`.
pub fn conv3x3_backward<F: Scalar>(
    input: &Tensor<F>,
    weights: &[F],
    output_grad: &Tensor<F>,
) -> Result<LayerGrad<F>> {
    let (c_in, h, w) = input.shape();
    let (c_out, gh, gw) = output_grad.shape();
    if (gh, gw) != (h, w) || weights.len() != c_out * c_in * 9 {
        return Err(Error::Shape(format!(
            "conv3x3 backward: input {:?}, output grad {:?}, {} weights",
            input.shape(),
            output_grad.shape(),
            weights.len()
        )));
    }
    let hw = h * w;
    let k = c_in * 9;

    let bias_grad: Vec<F> = (0..c_out)
        .map(|c| output_grad.plane(c).iter().copied().sum())
        .collect();

    // dW = dY · colsᵀ
    let cols = im2col(input);
    let mut weight_grad = vec![F::zero(); c_out * k];
    F::gemm(
        c_out,
        hw,
        k,
        F::one(),
        output_grad.data(),
        (hw, 1),
        &cols,
        (1, hw),
        F::zero(),
        &mut weight_grad,
        (k, 1),
    );
    drop(cols);

    // dX is the correlation of dY with the kernel flipped in space and
    // transposed in channels.
    let mut flipped = vec![F::zero(); c_in * c_out * 9];
    for co in 0..c_out {
        for ci in 0..c_in {
            for t in 0..9 {
                flipped[(ci * c_out + co) * 9 + (8 - t)] = weights[(co * c_in + ci) * 9 + t];
            }
        }
    }
    let zero_bias = vec![F::zero(); c_in];
    let input_grad = conv3x3(output_grad, &flipped, &zero_bias)?;

    Ok(LayerGrad {
        input_grad,
        param_grads: vec![weight_grad, bias_grad],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::gradcheck::*;
    use crate::rng;

    /// Direct nested-loop correlation, independent of im2col/gemm.
    fn conv_oracle(input: &Tensor<f64>, weights: &[f64], bias: &[f64]) -> Tensor<f64> {
        let (c_in, h, w) = input.shape();
        let c_out = bias.len();
        let mut out = Tensor::zeros(c_out, h, w);
        for co in 0..c_out {
            for i in 0..h {
                for j in 0..w {
                    let mut acc = bias[co];
                    for ci in 0..c_in {
                        for kh in 0..3 {
                            for kw in 0..3 {
                                let si = i as isize + kh as isize - 1;
                                let sj = j as isize + kw as isize - 1;
                                if si >= 0 && sj >= 0 && (si as usize) < h && (sj as usize) < w {
                                    acc += weights[((co * c_in + ci) * 3 + kh) * 3 + kw]
                                        * input.get(ci, si as usize, sj as usize);
                                }
                            }
                        }
                    }
                    out.set(co, i, j, acc);
                }
            }
        }
        out
    }

    #[test]
    fn identity_kernel_reproduces_input() {
        let x = Tensor::from_vec(1, 3, 3, (1..=9).map(f64::from).collect()).unwrap();
        let mut k = vec![0.0; 9];
        k[4] = 1.0;
        let y = conv3x3(&x, &k, &[0.0]).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn ones_kernel_on_constant_sums_nine() {
        let v = 0.7f64;
        let x = Tensor::filled(1, 5, 5, v);
        let y = conv3x3(&x, &[1.0; 9], &[0.0]).unwrap();
        assert!((y.get(0, 2, 2) - 9.0 * v).abs() < 1e-12);
        // corner sees only a 2×2 patch
        assert!((y.get(0, 0, 0) - 4.0 * v).abs() < 1e-12);
    }

    #[test]
    fn matches_nested_loop_oracle() {
        let mut r = rng::stream(11, "conv");
        let x = Tensor::from_vec(2, 4, 4, uniform_vec(&mut r, 32, -1.0, 1.0)).unwrap();
        let wts = uniform_vec(&mut r, 3 * 2 * 9, -1.0, 1.0);
        let b = uniform_vec(&mut r, 3, -1.0, 1.0);
        let got = conv3x3(&x, &wts, &b).unwrap();
        let want = conv_oracle(&x, &wts, &b);
        for (g, w) in got.data().iter().zip(want.data()) {
            assert!((g - w).abs() <= 1e-6 * w.abs().max(1.0));
        }
        let got32 = conv3x3(&x.cast::<f32>(), &to32(&wts), &to32(&b)).unwrap();
        for (g, w) in got32.data().iter().zip(want.data()) {
            assert!((f64::from(*g) - w).abs() <= 1e-5 * w.abs().max(1.0));
        }
    }

    fn to32(v: &[f64]) -> Vec<f32> {
        v.iter().map(|&x| x as f32).collect()
    }

    #[test]
    fn channel_mismatch_is_an_error() {
        let x = Tensor::<f64>::zeros(2, 4, 4);
        assert!(conv3x3(&x, &[0.0; 9], &[0.0]).is_err());
        let g = Tensor::<f64>::zeros(1, 3, 4);
        assert!(conv3x3_backward(&x, &[0.0; 18], &g).is_err());
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut r = rng::stream(12, "conv-fd");
        let (c_in, c_out, h, w) = (1, 2, 4, 4);
        let x = uniform_vec(&mut r, c_in * h * w, -1.0, 1.0);
        let wts = uniform_vec(&mut r, c_out * c_in * 9, -1.0, 1.0);
        let b = uniform_vec(&mut r, c_out, -1.0, 1.0);
        let proj = uniform_vec(&mut r, c_out * h * w, -1.0, 1.0);
        let xt = Tensor::from_vec(c_in, h, w, x.clone()).unwrap();
        let g = conv3x3_backward(&xt, &wts, &Tensor::from_vec(c_out, h, w, proj.clone()).unwrap())
            .unwrap();

        let loss_x = |xv: &[f64]| {
            let t = Tensor::from_vec(c_in, h, w, xv.to_vec()).unwrap();
            dot(conv3x3(&t, &wts, &b).unwrap().data(), &proj)
        };
        assert!(max_rel_err(loss_x, &x, g.input_grad.data()) < FD_REL_TOL);
        let loss_w = |wv: &[f64]| dot(conv3x3(&xt, wv, &b).unwrap().data(), &proj);
        assert!(max_rel_err(loss_w, &wts, &g.param_grads[0]) < FD_REL_TOL);
        let loss_b = |bv: &[f64]| dot(conv3x3(&xt, &wts, bv).unwrap().data(), &proj);
        assert!(max_rel_err(loss_b, &b, &g.param_grads[1]) < FD_REL_TOL);
    }

    #[test]
    fn zero_output_grad_gives_zero_grads() {
        let x = Tensor::filled(2, 3, 3, 0.5);
        let g = conv3x3_backward(&x, &[0.3; 36], &Tensor::zeros(2, 3, 3)).unwrap();
        assert!(g.input_grad.data().iter().all(|&v| v == 0.0));
        assert!(g.param_grads.iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn identity_kernel_passes_gradient_through() {
        let mut k = vec![0.0; 9];
        k[4] = 1.0;
        let x = Tensor::filled(1, 4, 4, 1.0);
        let gy = Tensor::from_vec(1, 4, 4, (0..16).map(f64::from).collect()).unwrap();
        let g = conv3x3_backward(&x, &k, &gy).unwrap();
        assert_eq!(g.input_grad, gy);
    }

    #[test]
    fn conv_is_linear_in_input() {
        let mut r = rng::stream(13, "conv-lin");
        let wts = uniform_vec(&mut r, 2 * 3 * 9, -1.0, 1.0);
        let b = vec![0.0; 2];
        let x = Tensor::from_vec(3, 5, 6, uniform_vec(&mut r, 90, -1.0, 1.0)).unwrap();
        let y = Tensor::from_vec(3, 5, 6, uniform_vec(&mut r, 90, -1.0, 1.0)).unwrap();
        let (a, c) = (0.7, -1.3);
        let mix = Tensor::from_vec(
            3,
            5,
            6,
            x.data().iter().zip(y.data()).map(|(p, q)| a * p + c * q).collect(),
        )
        .unwrap();
        let lhs = conv3x3(&mix, &wts, &b).unwrap();
        let fx = conv3x3(&x, &wts, &b).unwrap();
        let fy = conv3x3(&y, &wts, &b).unwrap();
        for ((l, p), q) in lhs.data().iter().zip(fx.data()).zip(fy.data()) {
            assert!((l - (a * p + c * q)).abs() < 1e-6);
        }
    }
}
