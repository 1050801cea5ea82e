//! Alternating adversarial training: one discriminator update on a combined
//! real/fake batch, then one generator update through the refreshed
//! discriminator, with per-iteration loss logging.

use std::io::Write;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::gan::adam::Adam;
use crate::gan::checkpoint::save_checkpoint;
use crate::gan::discriminator::{Discriminator, DiscriminatorConfig};
use crate::gan::generator::{Generator, GeneratorConfig};
use crate::gan::loss::{gan_value, generator_loss, loss_d_grads, loss_g_grads};
use crate::qlayers::{grads_of, params_of, set_params, DiffBlock};
use crate::tensor::{q_image_to_real, real_to_q_image, QTensor, RTensor};

/// Training hyperparameters.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub iterations: u64,
    pub batch_size: usize,
    pub seed: u64,
    pub lr_g: f64,
    pub lr_d: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    /// Checkpoint cadence in iterations; 0 writes only the final checkpoint.
    pub checkpoint_every: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            iterations: 2000,
            batch_size: 8,
            seed: 1,
            lr_g: 2e-4,
            lr_d: 2e-4,
            adam_beta1: 0.5,
            adam_beta2: 0.999,
            checkpoint_every: 0,
        }
    }
}

/// One logged training iteration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossRow {
    pub iter: u64,
    pub loss_d: f64,
    pub loss_g: f64,
}

/// The trainable pair plus optimizer and RNG state.
#[derive(Clone, Debug)]
pub struct Gan {
    pub generator: Generator,
    pub discriminator: Discriminator,
    pub opt_g: Adam,
    pub opt_d: Adam,
    pub iteration: u64,
    pub rng: ChaCha8Rng,
}

impl Gan {
    /// Seeded initialization of both networks and their optimizers.
    pub fn new(
        gen_cfg: GeneratorConfig,
        disc_cfg: DiscriminatorConfig,
        train_cfg: &TrainConfig,
    ) -> Result<Gan> {
        let mut rng = ChaCha8Rng::seed_from_u64(train_cfg.seed);
        let mut generator = Generator::new(gen_cfg)?;
        generator.init_params(&mut rng);
        let mut discriminator = Discriminator::new(disc_cfg)?;
        discriminator.init_params(&mut rng);
        let opt_g = Adam::new(
            generator.param_len(),
            train_cfg.lr_g,
            train_cfg.adam_beta1,
            train_cfg.adam_beta2,
        );
        let opt_d = Adam::new(
            discriminator.param_len(),
            train_cfg.lr_d,
            train_cfg.adam_beta1,
            train_cfg.adam_beta2,
        );
        Ok(Gan {
            generator,
            discriminator,
            opt_g,
            opt_d,
            iteration: 0,
            rng,
        })
    }
}

fn adam_step<B: DiffBlock>(opt: &mut Adam, block: &mut B) {
    let mut params = params_of(block);
    let grads = grads_of(block);
    opt.step(&mut params, &grads);
    set_params(block, &params);
}

/// One alternating update: discriminator on (real, fake), then generator
/// through the frozen-for-this-step discriminator. Returns `(loss_d, loss_g)`.
pub fn train_step(gan: &mut Gan, batch: &[QTensor]) -> Result<(f64, f64)> {
    let m = batch.len();
    if m < 2 {
        return Err(Error::domain(format!(
            "training batch must have at least 2 images, got {m}"
        )));
    }

    let zs: Vec<QTensor> = (0..m).map(|_| gan.generator.sample_latent(&mut gan.rng)).collect();
    let fakes = gan.generator.forward_batch(&zs, true)?;
    let fake_rt: Vec<RTensor> = fakes.iter().map(q_image_to_real).collect::<Result<_>>()?;
    let real_rt: Vec<RTensor> = batch.iter().map(q_image_to_real).collect::<Result<_>>()?;

    // Discriminator update on the combined batch.
    let mut combined = real_rt;
    combined.extend(fake_rt.iter().cloned());
    let probs = gan.discriminator.forward_probs(&combined)?;
    let (p_real, p_fake) = probs.split_at(m);
    let (loss_d, _) = gan_value(p_real, p_fake);
    if !loss_d.is_finite() {
        return Err(Error::Diverged {
            iter: gan.iteration,
            loss_d,
            loss_g: f64::NAN,
        });
    }
    let (g_real, g_fake) = loss_d_grads(p_real, p_fake);
    let mut d_probs = g_real;
    d_probs.extend(g_fake);
    gan.discriminator.zero_grads();
    gan.discriminator.backward_probs(&d_probs)?;
    adam_step(&mut gan.opt_d, &mut gan.discriminator);

    // Generator update through the refreshed discriminator.
    let probs_fake = gan.discriminator.forward_probs(&fake_rt)?;
    let loss_g = generator_loss(&probs_fake);
    if !loss_g.is_finite() {
        return Err(Error::Diverged {
            iter: gan.iteration,
            loss_d,
            loss_g,
        });
    }
    let dp = loss_g_grads(&probs_fake);
    gan.discriminator.zero_grads();
    let d_images_rt = gan.discriminator.backward_probs(&dp)?;
    gan.discriminator.zero_grads();
    let d_fakes: Vec<QTensor> = d_images_rt.iter().map(real_to_q_image).collect::<Result<_>>()?;
    gan.generator.zero_grads();
    gan.generator.backward_batch(&d_fakes, true)?;
    adam_step(&mut gan.opt_g, &mut gan.generator);

    Ok((loss_d, loss_g))
}

/// Output plumbing for [`train`]: an optional loss-CSV sink and an optional
/// checkpoint target.
#[derive(Default)]
pub struct TrainSinks<'a> {
    pub loss_writer: Option<&'a mut dyn Write>,
    pub checkpoint_path: Option<PathBuf>,
    /// Echo of the fully-resolved run configuration, stored in checkpoints.
    pub config_echo: String,
}

pub const LOSS_CSV_HEADER: &str = "iter,loss_d,loss_g";

fn write_loss_row(w: &mut dyn Write, row: &LossRow) -> std::io::Result<()> {
    writeln!(w, "{},{},{}", row.iter, row.loss_d, row.loss_g)
}

fn checkpoint_to(path: &Path, gan: &Gan, echo: &str) -> Result<()> {
    save_checkpoint(path, gan, echo)
}

/// Run the alternating loop for `cfg.iterations` over uniformly resampled
/// batches, emitting one CSV row per iteration and checkpointing at the
/// configured cadence (and at the end).
pub fn train(
    gan: &mut Gan,
    images: &[QTensor],
    cfg: &TrainConfig,
    sinks: &mut TrainSinks,
) -> Result<Vec<LossRow>> {
    if images.is_empty() {
        return Err(Error::config("training dataset is empty"));
    }
    if let Some(w) = sinks.loss_writer.as_deref_mut() {
        writeln!(w, "{LOSS_CSV_HEADER}").map_err(|e| Error::io("loss csv", e))?;
    }
    let mut rows = Vec::with_capacity(cfg.iterations as usize);
    for _ in 0..cfg.iterations {
        let batch: Vec<QTensor> = (0..cfg.batch_size)
            .map(|_| images[gan.rng.gen_range(0..images.len())].clone())
            .collect();
        let (loss_d, loss_g) = train_step(gan, &batch)?;
        gan.iteration += 1;
        let row = LossRow {
            iter: gan.iteration,
            loss_d,
            loss_g,
        };
        rows.push(row);
        if let Some(w) = sinks.loss_writer.as_deref_mut() {
            write_loss_row(w, &row).map_err(|e| Error::io("loss csv", e))?;
        }
        if cfg.checkpoint_every > 0 && gan.iteration % cfg.checkpoint_every == 0 {
            if let Some(path) = &sinks.checkpoint_path {
                checkpoint_to(path, gan, &sinks.config_echo)?;
            }
        }
    }
    if let Some(path) = &sinks.checkpoint_path {
        checkpoint_to(path, gan, &sinks.config_echo)?;
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn tiny_configs(seed: u64) -> (GeneratorConfig, DiscriminatorConfig, TrainConfig) {
        let gen_cfg = GeneratorConfig::desk_scale(8, 8, 2).unwrap();
        let disc_cfg = DiscriminatorConfig::desk_scale(8, 4).unwrap();
        let train_cfg = TrainConfig {
            iterations: 5,
            batch_size: 4,
            seed,
            ..TrainConfig::default()
        };
        (gen_cfg, disc_cfg, train_cfg)
    }

    fn tiny_dataset(n: usize, side: usize, seed: u64) -> Vec<QTensor> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let data: Vec<f64> = (0..side * side * 3).map(|_| rng.gen_range(-0.9..0.9)).collect();
                QTensor::from_data(1, side, side, data).unwrap()
            })
            .collect()
    }

    #[test]
    fn zero_learning_rates_leave_all_parameters_bitwise_unchanged() {
        let (g, d, mut t) = tiny_configs(5);
        t.lr_g = 0.0;
        t.lr_d = 0.0;
        let mut gan = Gan::new(g, d, &t).unwrap();
        let before_g = params_of(&gan.generator);
        let before_d = params_of(&gan.discriminator);
        let data = tiny_dataset(6, 8, 9);
        train_step(&mut gan, &data[..4]).unwrap();
        assert_eq!(params_of(&gan.generator), before_g);
        assert_eq!(params_of(&gan.discriminator), before_d);
    }

    #[test]
    fn small_batches_are_rejected() {
        let (g, d, t) = tiny_configs(5);
        let mut gan = Gan::new(g, d, &t).unwrap();
        let data = tiny_dataset(1, 8, 9);
        assert!(matches!(train_step(&mut gan, &data), Err(Error::Domain(_))));
    }

    #[test]
    fn fixed_seed_training_is_reproducible() {
        let data = tiny_dataset(6, 8, 9);
        let run = || {
            let (g, d, t) = tiny_configs(5);
            let mut gan = Gan::new(g, d, &t).unwrap();
            let mut sinks = TrainSinks::default();
            train(&mut gan, &data, &t, &mut sinks).unwrap()
        };
        let a = run();
        let b = run();
        assert_eq!(a, b);
    }

    #[test]
    fn zero_iterations_keep_the_initialization() {
        let (g, d, mut t) = tiny_configs(5);
        t.iterations = 0;
        let mut gan = Gan::new(g.clone(), d.clone(), &t).unwrap();
        let before = params_of(&gan.generator);
        let data = tiny_dataset(6, 8, 9);
        let rows = train(&mut gan, &data, &t, &mut TrainSinks::default()).unwrap();
        assert!(rows.is_empty());
        assert_eq!(gan.iteration, 0);
        assert_eq!(params_of(&gan.generator), before);
    }
}
