//! Differentiable layer primitives used by the denoiser.
//!
//! Everything here is a plain function of its inputs: forward passes return
//! fresh tensors and backward passes return a [`LayerGrad`]. There is no graph
//! or tape; the U-Net in [`crate::diffusion`] wires forward and backward calls
//! together explicitly.
//!
//! All layers are generic over [`Scalar`] so the same code paths run in `f32`
//! for training and in `f64` for finite-difference gradient checks.

mod activation;
mod adam;
mod conv;
mod dense;
mod loss;
mod pool;
mod scalar;
mod tensor;
mod upsample;

pub use activation::{gelu, gelu_backward, relu, relu_backward};
pub use adam::{adam_step, AdamState};
pub use conv::{conv3x3, conv3x3_backward};
pub use dense::{dense, dense_backward};
pub use loss::{mse, mse_backward};
pub use pool::{maxpool2x2, maxpool2x2_backward};
pub use scalar::Scalar;
pub use tensor::Tensor;
pub use upsample::{bilinear_upsample2x, bilinear_upsample2x_backward};

/// Gradients of a layer with respect to its input and its parameters.
///
/// `param_grads` follows the parameter order of the layer's forward call
/// (weights first, then bias).
#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrad<F> {
    pub input_grad: Tensor<F>,
    pub param_grads: Vec<Vec<F>>,
}

#[cfg(test)]
pub(crate) mod gradcheck;
