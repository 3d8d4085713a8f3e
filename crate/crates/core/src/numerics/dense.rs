use crate::{Error, Result};

use super::Scalar;

fn check<F>(x: &[F], w: &[F], b: &[F]) -> Result<()> {
    if w.len() != b.len() * x.len() {
        return Err(Error::Shape(format!(
            "dense: {} weights for {}→{}",
            w.len(),
            x.len(),
            b.len()
        )));
    }
    Ok(())
}

/// `W·x + b` with `W` stored `out × in` row-major.
pub fn dense<F: Scalar>(x: &[F], w: &[F], b: &[F]) -> Result<Vec<F>> {
    check(x, w, b)?;
    let n_in = x.len();
    Ok(b.iter()
        .enumerate()
        .map(|(o, &bias)| {
            w[o * n_in..(o + 1) * n_in]
                .iter()
                .zip(x)
                .fold(bias, |acc, (&wi, &xi)| acc + wi * xi)
        })
        .collect())
}

/// Returns `(input_grad, weight_grad, bias_grad)`.
pub fn dense_backward<F: Scalar>(
    x: &[F],
    w: &[F],
    output_grad: &[F],
) -> Result<(Vec<F>, Vec<F>, Vec<F>)> {
    check(x, w, output_grad)?;
    let n_in = x.len();
    let mut dx = vec![F::zero(); n_in];
    let mut dw = vec![F::zero(); w.len()];
    for (o, &g) in output_grad.iter().enumerate() {
        let row = &w[o * n_in..(o + 1) * n_in];
        for i in 0..n_in {
            dx[i] += row[i] * g;
            dw[o * n_in + i] = g * x[i];
        }
    }
    Ok((dx, dw, output_grad.to_vec()))
}
