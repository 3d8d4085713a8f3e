use crate::{Error, Result};

use super::{Scalar, Tensor};

/// 2×2 max pooling with stride 2.
///
/// Returns the pooled tensor and, for every output cell, the flat index into
/// `input.data()` of the winning element (first maximum in row-major block
/// order).
pub fn maxpool2x2<F: Scalar>(input: &Tensor<F>) -> Result<(Tensor<F>, Vec<usize>)> {
    let (c, h, w) = input.shape();
    if h % 2 != 0 || w % 2 != 0 {
        return Err(Error::Shape(format!("maxpool2x2 needs even size, got {h}x{w}")));
    }
    let (oh, ow) = (h / 2, w / 2);
    let mut out = Tensor::zeros(c, oh, ow);
    let mut argmax = Vec::with_capacity(c * oh * ow);
    let src = input.data();
    for ch in 0..c {
        let base = ch * h * w;
        for i in 0..oh {
            for j in 0..ow {
                let r0 = base + 2 * i * w + 2 * j;
                let mut best = r0;
                for idx in [r0 + 1, r0 + w, r0 + w + 1] {
                    if src[idx] > src[best] {
                        best = idx;
                    }
                }
                out.set(ch, i, j, src[best]);
                argmax.push(best);
            }
        }
    }
    Ok((out, argmax))
}

/// Routes each output gradient to the input element that won the max.
pub fn maxpool2x2_backward<F: Scalar>(
    input_shape: (usize, usize, usize),
    argmax: &[usize],
    output_grad: &Tensor<F>,
) -> Result<Tensor<F>> {
    let (c, h, w) = input_shape;
    if output_grad.shape() != (c, h / 2, w / 2) || argmax.len() != output_grad.data().len() {
        return Err(Error::Shape(format!(
            "maxpool2x2 backward: grad {:?} for input {:?}",
            output_grad.shape(),
            input_shape
        )));
    }
    let mut grad = Tensor::zeros(c, h, w);
    let g = grad.data_mut();
    for (&idx, &v) in argmax.iter().zip(output_grad.data()) {
        g[idx] += v;
    }
    Ok(grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::gradcheck::*;
    use crate::rng;

    #[test]
    fn single_block_takes_max() {
        let x = Tensor::from_vec(1, 2, 2, vec![1.0f64, 2.0, 3.0, 4.0]).unwrap();
        let (y, arg) = maxpool2x2(&x).unwrap();
        assert_eq!(y.data(), &[4.0]);
        assert_eq!(arg, vec![3]);
    }

    #[test]
    fn constant_stays_constant_at_half_size() {
        let x = Tensor::filled(2, 6, 4, 0.25f32);
        let (y, _) = maxpool2x2(&x).unwrap();
        assert_eq!(y.shape(), (2, 3, 2));
        assert!(y.data().iter().all(|&v| v == 0.25));
    }

    #[test]
    fn matches_nested_loop_oracle() {
        let mut r = rng::stream(21, "pool");
        let x = Tensor::from_vec(1, 6, 6, uniform_vec(&mut r, 36, -1.0, 1.0)).unwrap();
        let (y, _) = maxpool2x2(&x).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let mut m = f64::NEG_INFINITY;
                for di in 0..2 {
                    for dj in 0..2 {
                        m = m.max(x.get(0, 2 * i + di, 2 * j + dj));
                    }
                }
                assert_eq!(y.get(0, i, j), m);
            }
        }
    }

    #[test]
    fn odd_size_rejected() {
        assert!(maxpool2x2(&Tensor::<f64>::zeros(1, 3, 4)).is_err());
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut r = rng::stream(22, "pool-fd");
        // distinct, well separated values keep the argmax stable under ±eps
        let mut vals: Vec<f64> = (0..32).map(|i| i as f64 * 0.01).collect();
        for i in (1..vals.len()).rev() {
            let j = rand::Rng::random_range(&mut r, 0..=i);
            vals.swap(i, j);
        }
        let x = Tensor::from_vec(2, 4, 4, vals.clone()).unwrap();
        let proj = uniform_vec(&mut r, 8, -1.0, 1.0);
        let (_, arg) = maxpool2x2(&x).unwrap();
        let g = maxpool2x2_backward(x.shape(), &arg, &Tensor::from_vec(2, 2, 2, proj.clone()).unwrap())
            .unwrap();
        let loss = |v: &[f64]| {
            let t = Tensor::from_vec(2, 4, 4, v.to_vec()).unwrap();
            dot(maxpool2x2(&t).unwrap().0.data(), &proj)
        };
        assert!(max_rel_err(loss, &vals, g.data()) < FD_REL_TOL);
    }
}
