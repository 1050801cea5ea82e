//! Quaternion generator + real discriminator assembly and adversarial
//! training.

pub mod adam;
pub mod checkpoint;
pub mod discriminator;
pub mod generator;
pub mod loss;
pub mod train;

pub use adam::Adam;
pub use checkpoint::{
    checkpoint_bytes, checkpoint_from_bytes, load_checkpoint, save_checkpoint, CHECKPOINT_VERSION,
};
pub use discriminator::{Discriminator, DiscriminatorConfig, RConvSpec};
pub use generator::{Generator, GeneratorBlock, GeneratorConfig};
pub use loss::{clamp_prob, gan_value, generator_loss, loss_d_grads, loss_g_grads};
pub use train::{train, train_step, Gan, LossRow, TrainConfig, TrainSinks, LOSS_CSV_HEADER};
