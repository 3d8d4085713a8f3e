use crate::{Error, Result};

use super::{Scalar, Tensor};

fn check<F: Scalar>(pred: &Tensor<F>, target: &Tensor<F>) -> Result<()> {
    if !pred.same_shape(target) {
        return Err(Error::Shape(format!(
            "mse: {:?} vs {:?}",
            pred.shape(),
            target.shape()
        )));
    }
    Ok(())
}

/// Mean squared error over all elements, accumulated in `f64`.
pub fn mse<F: Scalar>(pred: &Tensor<F>, target: &Tensor<F>) -> Result<f64> {
    check(pred, target)?;
    let n = pred.data().len().max(1) as f64;
    let sum: f64 = pred
        .data()
        .iter()
        .zip(target.data())
        .map(|(&p, &t)| {
            let d = (p - t).to_f64().unwrap_or(f64::NAN);
            d * d
        })
        .sum();
    Ok(sum / n)
}

/// `∂mse/∂pred = 2(pred − target)/N`.
pub fn mse_backward<F: Scalar>(pred: &Tensor<F>, target: &Tensor<F>) -> Result<Tensor<F>> {
    check(pred, target)?;
    let scale = F::lit(2.0 / pred.data().len().max(1) as f64);
    let data = pred
        .data()
        .iter()
        .zip(target.data())
        .map(|(&p, &t)| (p - t) * scale)
        .collect();
    Tensor::from_vec(pred.channels(), pred.height(), pred.width(), data)
}
