use std::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::{Error, Result};

use super::{Scalar, Tensor};

pub fn relu<F: Scalar>(input: &Tensor<F>) -> Tensor<F> {
    input.map(|v| v.max(F::zero()))
}

/// Gradient of ReLU given the forward *input*; zero at and below 0.
pub fn relu_backward<F: Scalar>(input: &Tensor<F>, output_grad: &Tensor<F>) -> Result<Tensor<F>> {
    if !input.same_shape(output_grad) {
        return Err(Error::Shape(format!(
            "relu backward: {:?} vs {:?}",
            input.shape(),
            output_grad.shape()
        )));
    }
    let data = input
        .data()
        .iter()
        .zip(output_grad.data())
        .map(|(&x, &g)| if x > F::zero() { g } else { F::zero() })
        .collect();
    Tensor::from_vec(input.channels(), input.height(), input.width(), data)
}

fn std_normal_cdf<F: Scalar>(x: F) -> F {
    F::lit(0.5) * (F::one() + (x * F::lit(FRAC_1_SQRT_2)).erf())
}

/// Exact GELU, `x·Φ(x)`.
pub fn gelu<F: Scalar>(x: &[F]) -> Vec<F> {
    x.iter().map(|&v| v * std_normal_cdf(v)).collect()
}

pub fn gelu_backward<F: Scalar>(x: &[F], output_grad: &[F]) -> Result<Vec<F>> {
    if x.len() != output_grad.len() {
        return Err(Error::Shape(format!(
            "gelu backward: {} inputs, {} grads",
            x.len(),
            output_grad.len()
        )));
    }
    let inv_sqrt_2pi = F::lit(1.0 / (2.0 * PI).sqrt());
    Ok(x.iter()
        .zip(output_grad)
        .map(|(&v, &g)| {
            let pdf = (-(v * v) * F::lit(0.5)).exp() * inv_sqrt_2pi;
            g * (std_normal_cdf(v) + v * pdf)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::gradcheck::*;
    use crate::rng;

    #[test]
    fn relu_values() {
        let x = Tensor::from_vec(1, 1, 2, vec![-1.0f64, 2.0]).unwrap();
        assert_eq!(relu(&x).data(), &[0.0, 2.0]);
    }

    #[test]
    fn gelu_values() {
        assert_eq!(gelu(&[0.0f64])[0], 0.0);
        // Φ(1) = 0.5·(1 + erf(1/√2)) = 0.841344746068543
        assert!((gelu(&[1.0f64])[0] - 0.841_344_746_068_543).abs() < 1e-12);
        assert!((gelu(&[1.0f32])[0] - 0.841_344_7).abs() < 1e-6);
    }

    #[test]
    fn relu_backward_matches_finite_differences() {
        let mut r = rng::stream(41, "relu-fd");
        let x = off_kink_vec(&mut r, 18);
        let proj = uniform_vec(&mut r, 18, -1.0, 1.0);
        let xt = Tensor::from_vec(2, 3, 3, x.clone()).unwrap();
        let g = relu_backward(&xt, &Tensor::from_vec(2, 3, 3, proj.clone()).unwrap()).unwrap();
        let loss = |v: &[f64]| dot(relu(&Tensor::from_vec(2, 3, 3, v.to_vec()).unwrap()).data(), &proj);
        assert!(max_rel_err(loss, &x, g.data()) < FD_REL_TOL);
    }

    #[test]
    fn gelu_backward_matches_finite_differences() {
        let mut r = rng::stream(42, "gelu-fd");
        let x = uniform_vec(&mut r, 16, -3.0, 3.0);
        let proj = uniform_vec(&mut r, 16, -1.0, 1.0);
        let g = gelu_backward(&x, &proj).unwrap();
        let loss = |v: &[f64]| dot(&gelu(v), &proj);
        assert!(max_rel_err(loss, &x, &g) < FD_REL_TOL);
    }
}
