//! Quaternion GAN micro-framework: quaternion algebra, differentiable
//! quaternion layers with closed-form gradients, adversarial training, and
//! semantic color-image inpainting by latent-space optimization.

pub mod dataio;
pub mod error;
pub mod gan;
pub mod inpaint;
pub mod metrics;
pub mod qalgebra;
pub mod qlayers;
pub mod tensor;

pub use error::{Error, Result};
pub use qalgebra::{Mat3, PureQuaternion, QMatrix, Quaternion, RotationParams};
pub use tensor::{QTensor, RTensor};
