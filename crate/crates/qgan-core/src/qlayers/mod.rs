//! Differentiable quaternion layers with explicit forward and backward
//! passes: convolution, transposed convolution, batch normalization, and
//! split activations, plus a finite-difference gradient-check harness.

pub mod activation;
pub mod conv;
pub mod gradcheck;
pub mod qbn;

pub use activation::{ActKind, SplitActivation};
pub use conv::{
    qconv_backward, qconv_forward, qdeconv_backward, qdeconv_forward, KernelGrads, QConv,
    QConvKernel, QDeconv,
};
pub use gradcheck::{gradient_check, GradCheckReport};
pub use qbn::QBatchNorm;

use crate::error::Result;
use crate::tensor::TensorOps;

/// A layer (or stack of layers) that can run a batched forward pass, push
/// gradients back through it, and expose its trainable parameters as a flat
/// indexed list. The flat view is what the optimizer and the gradient
/// checker work against.
pub trait DiffBlock {
    type Tensor: TensorOps;

    /// Batched forward pass. Caches whatever the backward pass needs.
    fn forward(&mut self, xs: &[Self::Tensor], train: bool) -> Result<Vec<Self::Tensor>>;

    /// Batched backward pass for the most recent forward. Accumulates
    /// parameter gradients internally and returns input gradients.
    fn backward(&mut self, d_out: &[Self::Tensor]) -> Result<Vec<Self::Tensor>>;

    fn param_len(&self) -> usize;
    fn param(&self, i: usize) -> f64;
    fn set_param(&mut self, i: usize, v: f64);
    fn param_grad(&self, i: usize) -> f64;
    fn zero_grads(&mut self);
}

/// Copy the flat parameter vector out of a block.
pub fn params_of<B: DiffBlock>(block: &B) -> Vec<f64> {
    (0..block.param_len()).map(|i| block.param(i)).collect()
}

/// Copy the flat gradient vector out of a block.
pub fn grads_of<B: DiffBlock>(block: &B) -> Vec<f64> {
    (0..block.param_len()).map(|i| block.param_grad(i)).collect()
}

/// Write a flat parameter vector back into a block.
pub fn set_params<B: DiffBlock>(block: &mut B, params: &[f64]) {
    assert_eq!(params.len(), block.param_len());
    for (i, &v) in params.iter().enumerate() {
        block.set_param(i, v);
    }
}
