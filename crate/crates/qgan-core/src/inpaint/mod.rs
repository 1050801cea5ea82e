//! Semantic inpainting over a frozen pre-trained network: masks, weighted
//! context loss, prior loss, latent descent, blending, and Poisson fusion.

pub mod loss;
pub mod mask;
pub mod optimize;
pub mod poisson;

pub use loss::{context_loss, prior_loss};
pub use mask::{make_center_mask, make_diag_mask, weight_matrix, Mask, WeightMatrix};
pub use optimize::{optimize_latent, InpaintConfig, LatentTrace};
pub use poisson::poisson_fuse;

use crate::error::{Error, Result};
use crate::gan::train::Gan;
use crate::tensor::QTensor;

/// Copy observed pixels from `y` and fill the hole from `gz`.
pub fn blend(mask: &Mask, y: &QTensor, gz: &QTensor) -> Result<QTensor> {
    if y.shape() != gz.shape() {
        return Err(Error::config("blend image shapes differ"));
    }
    if y.channels() != 1 || y.height() != mask.height() || y.width() != mask.width() {
        return Err(Error::config("mask does not match the images"));
    }
    let mut out = y.clone();
    for i in 0..y.height() {
        for j in 0..y.width() {
            if !mask.observed(i, j) {
                out.set_pixel(0, i, j, gz.pixel(0, i, j));
            }
        }
    }
    Ok(out)
}

/// Result of one inpainting job.
#[derive(Clone, Debug)]
pub struct InpaintResult {
    pub image: QTensor,
    pub trace: LatentTrace,
    pub mask_fraction: f64,
}

/// Full pipeline: optimize the latent vector, decode it, blend the observed
/// pixels back in, and optionally smooth the seam with Poisson fusion.
pub fn inpaint_image(
    y: &QTensor,
    mask: &Mask,
    gan: &mut Gan,
    cfg: &InpaintConfig,
) -> Result<InpaintResult> {
    let (z, trace) = optimize_latent(y, mask, gan, cfg)?;
    let gz = gan
        .generator
        .forward_batch(std::slice::from_ref(&z), false)?
        .remove(0);
    let blended = blend(mask, y, &gz)?;
    let image = if cfg.poisson {
        poisson_fuse(y, mask, &gz)?
    } else {
        blended
    };
    Ok(InpaintResult {
        image,
        trace,
        mask_fraction: mask.missing_fraction(),
    })
}
