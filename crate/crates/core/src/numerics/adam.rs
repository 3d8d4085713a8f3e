use crate::{Error, Result};

use super::Scalar;

/// Adam moment estimates and hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<F> {
    pub step: u64,
    pub m: Vec<F>,
    pub v: Vec<F>,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl<F: Scalar> AdamState<F> {
    /// Fresh state with β₁ = 0.9, β₂ = 0.999, ε = 1e-8.
    pub fn new(n_params: usize, lr: f64) -> Self {
        Self {
            step: 0,
            m: vec![F::zero(); n_params],
            v: vec![F::zero(); n_params],
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// One bias-corrected Adam update.
///
/// A non-finite gradient rejects the whole update: parameters and state are
/// left untouched and [`Error::NonFinite`] is returned.
pub fn adam_step<F: Scalar>(params: &mut [F], grads: &[F], state: &mut AdamState<F>) -> Result<()> {
    if params.len() != grads.len() || state.m.len() != params.len() || state.v.len() != params.len() {
        return Err(Error::Shape(format!(
            "adam: {} params, {} grads, {} moments",
            params.len(),
            grads.len(),
            state.m.len()
        )));
    }
    if let Some(i) = grads.iter().position(|g| !g.is_finite()) {
        return Err(Error::NonFinite(format!("gradient element {i}")));
    }
    state.step += 1;
    let t = state.step as i32;
    let b1 = F::lit(state.beta1);
    let b2 = F::lit(state.beta2);
    let one_m_b1 = F::lit(1.0 - state.beta1);
    let one_m_b2 = F::lit(1.0 - state.beta2);
    let bc1 = F::lit(1.0 / (1.0 - state.beta1.powi(t)));
    let bc2 = F::lit(1.0 / (1.0 - state.beta2.powi(t)));
    let lr = F::lit(state.lr);
    let eps = F::lit(state.eps);
    for (((p, &g), m), v) in params
        .iter_mut()
        .zip(grads)
        .zip(state.m.iter_mut())
        .zip(state.v.iter_mut())
    {
        *m = b1 * *m + one_m_b1 * g;
        *v = b2 * *v + one_m_b2 * g * g;
        let m_hat = *m * bc1;
        let v_hat = *v * bc2;
        *p -= lr * m_hat / (v_hat.sqrt() + eps);
    }
    Ok(())
}
