//! Latent-space descent: Adam on the latent vector of a frozen pre-trained
//! generator, minimizing the weighted context loss plus the adversarial
//! prior loss.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::gan::adam::Adam;
use crate::gan::train::Gan;
use crate::inpaint::loss::{context_loss, prior_loss};
use crate::inpaint::mask::{weight_matrix, Mask};
use crate::qlayers::DiffBlock;
use crate::tensor::{q_image_to_real, real_to_q_image, QTensor};

/// Latent-optimization hyperparameters.
#[derive(Clone, Debug, PartialEq)]
pub struct InpaintConfig {
    /// Prior-loss weight.
    pub lambda: f64,
    pub iterations: u64,
    pub latent_lr: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    /// Neighborhood radius of the context-loss weight matrix.
    pub window_radius: usize,
    /// Apply Poisson fusion after blending.
    pub poisson: bool,
    pub seed: u64,
}

impl Default for InpaintConfig {
    fn default() -> Self {
        InpaintConfig {
            lambda: 0.003,
            iterations: 1000,
            latent_lr: 0.1,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            window_radius: 3,
            poisson: true,
            seed: 0,
        }
    }
}

impl InpaintConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations < 1 {
            return Err(Error::config("inpainting needs at least one iteration"));
        }
        if self.lambda < 0.0 {
            return Err(Error::config("lambda must be non-negative"));
        }
        Ok(())
    }
}

/// Recorded descent trajectory: total loss per iteration and the index of
/// the returned (lowest-loss) iterate.
#[derive(Clone, Debug)]
pub struct LatentTrace {
    pub losses: Vec<f64>,
    pub best_iter: usize,
}

/// Run `cfg.iterations` Adam steps on the latent vector with both networks
/// frozen (the generator in inference mode), and return the iterate with the
/// lowest recorded total loss.
pub fn optimize_latent(
    y: &QTensor,
    mask: &Mask,
    gan: &mut Gan,
    cfg: &InpaintConfig,
) -> Result<(QTensor, LatentTrace)> {
    cfg.validate()?;
    gan.generator.ensure_trained()?;
    if y.channels() != 1 || y.height() != mask.height() || y.width() != mask.width() {
        return Err(Error::config("corrupted image and mask shapes differ"));
    }
    let weights = weight_matrix(mask, cfg.window_radius)?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut z = gan.generator.sample_latent(&mut rng);
    let mut opt = Adam::new(z.data().len(), cfg.latent_lr, cfg.adam_beta1, cfg.adam_beta2);

    let mut best_loss = f64::INFINITY;
    let mut best_z = z.clone();
    let mut best_iter = 0usize;
    let mut losses = Vec::with_capacity(cfg.iterations as usize);

    for it in 0..cfg.iterations {
        let gz_batch = gan.generator.forward_batch(std::slice::from_ref(&z), false)?;
        let gz = &gz_batch[0];

        let (loss_ctx, mut d_gz) = context_loss(gz, y, &weights)?;
        let mut total = loss_ctx;

        if cfg.lambda != 0.0 {
            let p = gan.discriminator.forward_probs(&[q_image_to_real(gz)?])?[0];
            let (loss_prior, d_prob) = prior_loss(p, cfg.lambda);
            total += loss_prior;
            gan.discriminator.zero_grads();
            let d_rt = gan.discriminator.backward_probs(&[d_prob])?;
            gan.discriminator.zero_grads();
            let d_prior = real_to_q_image(&d_rt[0])?;
            for (acc, v) in d_gz.data_mut().iter_mut().zip(d_prior.data()) {
                *acc += v;
            }
        }

        if !total.is_finite() {
            return Err(Error::domain(format!(
                "inpainting loss became non-finite at iteration {it}"
            )));
        }
        losses.push(total);
        if total < best_loss {
            best_loss = total;
            best_z = z.clone();
            best_iter = it as usize;
        }

        let d_z = gan.generator.backward_batch(&[d_gz], false)?;
        let mut flat = z.data().to_vec();
        opt.step(&mut flat, d_z[0].data());
        z.data_mut().copy_from_slice(&flat);
    }

    Ok((
        best_z,
        LatentTrace {
            losses,
            best_iter,
        },
    ))
}
