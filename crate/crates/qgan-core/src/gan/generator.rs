//! The quaternion generator: a latent pure-quaternion vector reshaped to a
//! 1x1 spatial map and upsampled by a stack of strided quaternion
//! deconvolutions, each followed by quaternion batch normalization and a
//! split activation, ending in a tanh image block.

use rand::Rng;

use crate::error::{Error, Result};
use crate::qlayers::{ActKind, DiffBlock, QBatchNorm, QConvKernel, QDeconv, SplitActivation};
use crate::tensor::QTensor;

/// One generator stage: deconvolution geometry plus its normalization and
/// activation choices.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GeneratorBlock {
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
    pub batch_norm: bool,
    pub activation: ActKind,
}

/// Generator topology; the last block must produce the single quaternion
/// channel of the image through a tanh.
#[derive(Clone, Debug, PartialEq)]
pub struct GeneratorConfig {
    pub latent_dim: usize,
    pub blocks: Vec<GeneratorBlock>,
    pub bn_epsilon: f64,
    pub bn_momentum: f64,
}

impl GeneratorConfig {
    /// Desk-scale topology: a 4x4 valid deconvolution out of the latent map,
    /// then stride-2 doublings up to `image_side`, halving the channel width
    /// each stage down to `base` before the image block.
    pub fn desk_scale(latent_dim: usize, image_side: usize, base: usize) -> Result<Self> {
        if base == 0 || latent_dim == 0 {
            return Err(Error::config("latent_dim and base width must be positive"));
        }
        let mut stages = 0usize;
        let mut side = image_side;
        while side > 4 && side % 2 == 0 {
            side /= 2;
            stages += 1;
        }
        if side != 4 || stages == 0 {
            return Err(Error::config(format!(
                "image side {image_side} must be 4 * 2^k with k >= 1"
            )));
        }
        let mut blocks = Vec::new();
        // Hidden widths: base * 2^(stages-1) down to base.
        let mut ch = base << (stages - 1);
        blocks.push(GeneratorBlock {
            out_channels: ch,
            kernel: 4,
            stride: 1,
            padding: 0,
            batch_norm: true,
            activation: ActKind::LeakyRelu(0.2),
        });
        for _ in 1..stages {
            ch /= 2;
            blocks.push(GeneratorBlock {
                out_channels: ch,
                kernel: 4,
                stride: 2,
                padding: 1,
                batch_norm: true,
                activation: ActKind::LeakyRelu(0.2),
            });
        }
        blocks.push(GeneratorBlock {
            out_channels: 1,
            kernel: 4,
            stride: 2,
            padding: 1,
            batch_norm: false,
            activation: ActKind::Tanh,
        });
        let cfg = GeneratorConfig {
            latent_dim,
            blocks,
            bn_epsilon: 1e-5,
            bn_momentum: 0.1,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.latent_dim == 0 {
            return Err(Error::config("latent_dim must be positive"));
        }
        let last = self
            .blocks
            .last()
            .ok_or_else(|| Error::config("generator needs at least one block"))?;
        if last.activation != ActKind::Tanh {
            return Err(Error::config("generator output activation must be tanh"));
        }
        if last.out_channels != 1 {
            return Err(Error::config(
                "generator output must be a single quaternion channel (one color image)",
            ));
        }
        Ok(())
    }

    /// Spatial side of the generated image.
    pub fn output_side(&self) -> Result<usize> {
        let mut side = 1usize;
        for (i, b) in self.blocks.iter().enumerate() {
            let out = ((side - 1) * b.stride + b.kernel) as isize - 2 * b.padding as isize;
            if out <= 0 {
                return Err(Error::config(format!("generator block {i} collapses spatially")));
            }
            side = out as usize;
        }
        Ok(side)
    }
}

#[derive(Clone, Debug)]
enum GenLayer {
    Deconv(QDeconv),
    Norm(QBatchNorm),
    Act(SplitActivation),
}

impl GenLayer {
    fn param_len(&self) -> usize {
        match self {
            GenLayer::Deconv(l) => l.param_len(),
            GenLayer::Norm(l) => l.param_len(),
            GenLayer::Act(l) => l.param_len(),
        }
    }
}

/// Generator network with explicit forward/backward passes.
#[derive(Clone, Debug)]
pub struct Generator {
    config: GeneratorConfig,
    layers: Vec<GenLayer>,
}

impl Generator {
    /// Build with identity taps and fresh normalization state; call
    /// [`Generator::init_params`] before training.
    pub fn new(config: GeneratorConfig) -> Result<Self> {
        config.validate()?;
        let mut layers = Vec::new();
        let mut in_ch = config.latent_dim;
        for block in &config.blocks {
            // A deconvolution consumes the kernel's out_channels and emits
            // its in_channels, so the kernel is declared transposed.
            let kernel = QConvKernel::identity(
                in_ch,
                block.out_channels,
                block.kernel,
                block.stride,
                block.padding,
            )?;
            layers.push(GenLayer::Deconv(QDeconv::new(kernel)));
            if block.batch_norm {
                layers.push(GenLayer::Norm(QBatchNorm::new(
                    block.out_channels,
                    config.bn_epsilon,
                    config.bn_momentum,
                )?));
            }
            layers.push(GenLayer::Act(SplitActivation::new(block.activation)));
            in_ch = block.out_channels;
        }
        Ok(Generator { config, layers })
    }

    /// Near-identity tap initialization: theta ~ U(-pi/8, pi/8),
    /// s ~ 1 + U(-0.05, 0.05).
    pub fn init_params<R: Rng>(&mut self, rng: &mut R) {
        use std::f64::consts::PI;
        for layer in &mut self.layers {
            if let GenLayer::Deconv(d) = layer {
                for tap in d.kernel.taps_mut() {
                    tap.s = 1.0 + rng.gen_range(-0.05..0.05);
                    tap.theta = rng.gen_range(-PI / 8.0..PI / 8.0);
                }
            }
        }
    }

    pub fn config(&self) -> &GeneratorConfig {
        &self.config
    }

    pub fn latent_dim(&self) -> usize {
        self.config.latent_dim
    }

    /// Draw a latent vector: `latent_dim` pure-quaternion components with
    /// i.i.d. uniform(-1, 1) imaginary parts, as a 1x1 spatial map.
    pub fn sample_latent<R: Rng>(&self, rng: &mut R) -> QTensor {
        let mut z = QTensor::zeros(self.config.latent_dim, 1, 1);
        for v in z.data_mut() {
            *v = rng.gen_range(-1.0..1.0);
        }
        z
    }

    fn check_latent(&self, zs: &[QTensor]) -> Result<()> {
        for z in zs {
            if z.shape() != (self.config.latent_dim, 1, 1) {
                return Err(Error::config(format!(
                    "latent batch item has shape {:?}, expected ({}, 1, 1)",
                    z.shape(),
                    self.config.latent_dim
                )));
            }
        }
        Ok(())
    }

    /// Forward a latent batch to images. `train` selects batch-statistics
    /// normalization (updating running stats) versus frozen statistics.
    pub fn forward_batch(&mut self, zs: &[QTensor], train: bool) -> Result<Vec<QTensor>> {
        self.check_latent(zs)?;
        let mut t = zs.to_vec();
        for layer in &mut self.layers {
            t = match layer {
                GenLayer::Deconv(l) => l.forward_batch(&t)?,
                GenLayer::Norm(l) => l.forward(&t, train)?,
                GenLayer::Act(l) => l.forward(&t, train)?,
            };
        }
        Ok(t)
    }

    /// Backward through the cached forward. With `want_param_grads` false
    /// only input gradients are produced (latent-space descent).
    pub fn backward_batch(
        &mut self,
        d_out: &[QTensor],
        want_param_grads: bool,
    ) -> Result<Vec<QTensor>> {
        let mut g = d_out.to_vec();
        for layer in self.layers.iter_mut().rev() {
            g = match layer {
                GenLayer::Deconv(l) => l.backward_batch(&g, want_param_grads)?,
                GenLayer::Norm(l) => l.backward(&g)?,
                GenLayer::Act(l) => l.backward(&g)?,
            };
        }
        Ok(g)
    }

    /// Switch every batch-norm layer's frozen statistics source to the given
    /// running stats sample count check; returns an error if any norm layer
    /// has never seen a training pass.
    pub fn ensure_trained(&self) -> Result<()> {
        for layer in &self.layers {
            if let GenLayer::Norm(n) = layer {
                if !n.is_trained() {
                    return Err(Error::domain(
                        "generator has untrained batch normalization statistics",
                    ));
                }
            }
        }
        Ok(())
    }

    pub(crate) fn deconv_layers(&self) -> Vec<&QDeconv> {
        self.layers
            .iter()
            .filter_map(|l| match l {
                GenLayer::Deconv(d) => Some(d),
                _ => None,
            })
            .collect()
    }

    pub(crate) fn deconv_layers_mut(&mut self) -> Vec<&mut QDeconv> {
        self.layers
            .iter_mut()
            .filter_map(|l| match l {
                GenLayer::Deconv(d) => Some(d),
                _ => None,
            })
            .collect()
    }

    pub(crate) fn norm_layers(&self) -> Vec<&QBatchNorm> {
        self.layers
            .iter()
            .filter_map(|l| match l {
                GenLayer::Norm(n) => Some(n),
                _ => None,
            })
            .collect()
    }

    pub(crate) fn norm_layers_mut(&mut self) -> Vec<&mut QBatchNorm> {
        self.layers
            .iter_mut()
            .filter_map(|l| match l {
                GenLayer::Norm(n) => Some(n),
                _ => None,
            })
            .collect()
    }
}

impl DiffBlock for Generator {
    type Tensor = QTensor;

    fn forward(&mut self, xs: &[QTensor], train: bool) -> Result<Vec<QTensor>> {
        self.forward_batch(xs, train)
    }

    fn backward(&mut self, d_out: &[QTensor]) -> Result<Vec<QTensor>> {
        self.backward_batch(d_out, true)
    }

    fn param_len(&self) -> usize {
        self.layers.iter().map(|l| l.param_len()).sum()
    }

    fn param(&self, mut i: usize) -> f64 {
        for layer in &self.layers {
            let n = layer.param_len();
            if i < n {
                return match layer {
                    GenLayer::Deconv(l) => l.param(i),
                    GenLayer::Norm(l) => l.param(i),
                    GenLayer::Act(l) => l.param(i),
                };
            }
            i -= n;
        }
        unreachable!("parameter index out of range")
    }

    fn set_param(&mut self, mut i: usize, v: f64) {
        for layer in &mut self.layers {
            let n = layer.param_len();
            if i < n {
                match layer {
                    GenLayer::Deconv(l) => l.set_param(i, v),
                    GenLayer::Norm(l) => l.set_param(i, v),
                    GenLayer::Act(l) => l.set_param(i, v),
                }
                return;
            }
            i -= n;
        }
        unreachable!("parameter index out of range")
    }

    fn param_grad(&self, mut i: usize) -> f64 {
        for layer in &self.layers {
            let n = layer.param_len();
            if i < n {
                return match layer {
                    GenLayer::Deconv(l) => l.param_grad(i),
                    GenLayer::Norm(l) => l.param_grad(i),
                    GenLayer::Act(l) => l.param_grad(i),
                };
            }
            i -= n;
        }
        unreachable!("parameter index out of range")
    }

    fn zero_grads(&mut self) {
        for layer in &mut self.layers {
            match layer {
                GenLayer::Deconv(l) => l.zero_grads(),
                GenLayer::Norm(l) => l.zero_grads(),
                GenLayer::Act(l) => l.zero_grads(),
            }
        }
    }
}
