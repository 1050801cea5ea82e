//! Real-valued DCGAN-style discriminator: strided convolutions with leaky
//! ReLU, and a single sigmoid head unit. It consumes the three imaginary
//! planes of a quaternion image as three real channels; only the generator
//! is quaternionic.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::qlayers::DiffBlock;
use crate::tensor::RTensor;

/// Geometry of one real convolution stage.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RConvSpec {
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
}

/// Discriminator topology. Every block except the last is followed by a
/// leaky ReLU; the last block must reduce to a single 1x1 logit, which the
/// sigmoid turns into a probability.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscriminatorConfig {
    pub in_channels: usize,
    pub image_side: usize,
    pub blocks: Vec<RConvSpec>,
    pub leaky_alpha: f64,
}

impl DiscriminatorConfig {
    /// Mirror of the desk-scale generator: stride-2 halvings from
    /// `image_side` down to 4x4, then a 4x4 valid conv to the logit.
    /// `base` is the channel width of the first stage.
    pub fn desk_scale(image_side: usize, base: usize) -> Result<Self> {
        if base == 0 {
            return Err(Error::config("discriminator base width must be positive"));
        }
        let mut blocks = Vec::new();
        let mut side = image_side;
        let mut ch = base;
        while side > 4 {
            if side % 2 != 0 {
                return Err(Error::config(format!(
                    "image side {image_side} is not a power-of-two multiple of 4"
                )));
            }
            blocks.push(RConvSpec {
                out_channels: ch,
                kernel: 4,
                stride: 2,
                padding: 1,
            });
            side /= 2;
            ch *= 2;
        }
        if side != 4 {
            return Err(Error::config(format!(
                "image side {image_side} must be at least 8 for the desk-scale topology"
            )));
        }
        blocks.push(RConvSpec {
            out_channels: 1,
            kernel: 4,
            stride: 1,
            padding: 0,
        });
        let cfg = DiscriminatorConfig {
            in_channels: 3,
            image_side,
            blocks,
            leaky_alpha: 0.2,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Check that the stages compose to a single 1x1 output unit.
    pub fn validate(&self) -> Result<()> {
        if self.blocks.is_empty() {
            return Err(Error::config("discriminator needs at least one block"));
        }
        let mut side = self.image_side;
        let mut ch = self.in_channels;
        for (i, b) in self.blocks.iter().enumerate() {
            let span = (side + 2 * b.padding) as isize - b.kernel as isize;
            if span < 0 || span as usize % b.stride != 0 {
                return Err(Error::config(format!(
                    "discriminator block {i} does not tile a {side}x{side} input"
                )));
            }
            side = span as usize / b.stride + 1;
            ch = b.out_channels;
        }
        if side != 1 || ch != 1 {
            return Err(Error::config(format!(
                "discriminator head must end at 1x1x1, ends at {ch}x{side}x{side}"
            )));
        }
        Ok(())
    }
}

/// One real convolution with bias, cached inputs, and accumulated gradients.
#[derive(Clone, Debug)]
struct RConv {
    in_channels: usize,
    out_channels: usize,
    kernel: usize,
    stride: usize,
    padding: usize,
    w: Vec<f64>,
    b: Vec<f64>,
    d_w: Vec<f64>,
    d_b: Vec<f64>,
    cache: Option<Vec<RTensor>>,
}

impl RConv {
    fn new(in_channels: usize, spec: RConvSpec) -> Self {
        let wlen = spec.out_channels * in_channels * spec.kernel * spec.kernel;
        RConv {
            in_channels,
            out_channels: spec.out_channels,
            kernel: spec.kernel,
            stride: spec.stride,
            padding: spec.padding,
            w: vec![0.0; wlen],
            b: vec![0.0; spec.out_channels],
            d_w: vec![0.0; wlen],
            d_b: vec![0.0; spec.out_channels],
            cache: None,
        }
    }

    #[inline]
    fn w_index(&self, o: usize, c: usize, kh: usize, kw: usize) -> usize {
        ((o * self.in_channels + c) * self.kernel + kh) * self.kernel + kw
    }

    fn out_dims(&self, h: usize, w: usize) -> (usize, usize) {
        let f = |n: usize| ((n + 2 * self.padding) - self.kernel) / self.stride + 1;
        (f(h), f(w))
    }

    fn forward_one(&self, x: &RTensor) -> RTensor {
        let (oh_n, ow_n) = self.out_dims(x.height(), x.width());
        let (h, w) = (x.height() as isize, x.width() as isize);
        let mut out = RTensor::zeros(self.out_channels, oh_n, ow_n);
        for o in 0..self.out_channels {
            for oh in 0..oh_n {
                for ow in 0..ow_n {
                    out.set(o, oh, ow, self.b[o]);
                }
            }
            for c in 0..self.in_channels {
                for kh in 0..self.kernel {
                    for kw in 0..self.kernel {
                        let wv = self.w[self.w_index(o, c, kh, kw)];
                        if wv == 0.0 {
                            continue;
                        }
                        for oh in 0..oh_n {
                            let ih = (oh * self.stride + kh) as isize - self.padding as isize;
                            if ih < 0 || ih >= h {
                                continue;
                            }
                            for ow in 0..ow_n {
                                let iw = (ow * self.stride + kw) as isize - self.padding as isize;
                                if iw < 0 || iw >= w {
                                    continue;
                                }
                                out.add(o, oh, ow, wv * x.get(c, ih as usize, iw as usize));
                            }
                        }
                    }
                }
            }
        }
        out
    }

    fn forward_batch(&mut self, xs: &[RTensor]) -> Result<Vec<RTensor>> {
        for x in xs {
            if x.channels() != self.in_channels {
                return Err(Error::config(format!(
                    "discriminator conv expects {} channels, got {}",
                    self.in_channels,
                    x.channels()
                )));
            }
        }
        let out: Vec<RTensor> = xs.par_iter().map(|x| self.forward_one(x)).collect();
        self.cache = Some(xs.to_vec());
        Ok(out)
    }

    fn backward_one(&self, x: &RTensor, g: &RTensor) -> (RTensor, Vec<f64>, Vec<f64>) {
        let (oh_n, ow_n) = self.out_dims(x.height(), x.width());
        let (h, w) = (x.height() as isize, x.width() as isize);
        let mut d_x = RTensor::zeros(x.channels(), x.height(), x.width());
        let mut d_w = vec![0.0; self.w.len()];
        let mut d_b = vec![0.0; self.b.len()];
        for o in 0..self.out_channels {
            for oh in 0..oh_n {
                for ow in 0..ow_n {
                    d_b[o] += g.get(o, oh, ow);
                }
            }
            for c in 0..self.in_channels {
                for kh in 0..self.kernel {
                    for kw in 0..self.kernel {
                        let wi = self.w_index(o, c, kh, kw);
                        let wv = self.w[wi];
                        let mut acc = 0.0;
                        for oh in 0..oh_n {
                            let ih = (oh * self.stride + kh) as isize - self.padding as isize;
                            if ih < 0 || ih >= h {
                                continue;
                            }
                            for ow in 0..ow_n {
                                let iw = (ow * self.stride + kw) as isize - self.padding as isize;
                                if iw < 0 || iw >= w {
                                    continue;
                                }
                                let gv = g.get(o, oh, ow);
                                acc += gv * x.get(c, ih as usize, iw as usize);
                                d_x.add(c, ih as usize, iw as usize, wv * gv);
                            }
                        }
                        d_w[wi] += acc;
                    }
                }
            }
        }
        (d_x, d_w, d_b)
    }

    fn backward_batch(&mut self, gs: &[RTensor]) -> Result<Vec<RTensor>> {
        let xs = self
            .cache
            .as_ref()
            .ok_or(Error::Usage("discriminator backward called before forward"))?;
        if gs.len() != xs.len() {
            return Err(Error::config("gradient batch size mismatch"));
        }
        let per_item: Vec<(RTensor, Vec<f64>, Vec<f64>)> = xs
            .par_iter()
            .zip(gs.par_iter())
            .map(|(x, g)| self.backward_one(x, g))
            .collect();
        let mut d_inputs = Vec::with_capacity(per_item.len());
        for (d_x, d_w, d_b) in per_item {
            for (acc, v) in self.d_w.iter_mut().zip(&d_w) {
                *acc += v;
            }
            for (acc, v) in self.d_b.iter_mut().zip(&d_b) {
                *acc += v;
            }
            d_inputs.push(d_x);
        }
        Ok(d_inputs)
    }

    fn param_len(&self) -> usize {
        self.w.len() + self.b.len()
    }
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// The full discriminator stack.
#[derive(Clone, Debug)]
pub struct Discriminator {
    config: DiscriminatorConfig,
    convs: Vec<RConv>,
    /// Pre-activation outputs of each hidden conv, for the leaky backward.
    act_inputs: Vec<Vec<RTensor>>,
    /// Probabilities of the most recent forward pass.
    probs: Option<Vec<f64>>,
}

impl Discriminator {
    /// Build with all-zero weights (so an untouched discriminator outputs
    /// exactly 0.5); call [`Discriminator::init_params`] for training.
    pub fn new(config: DiscriminatorConfig) -> Result<Self> {
        config.validate()?;
        let mut convs = Vec::with_capacity(config.blocks.len());
        let mut in_ch = config.in_channels;
        for spec in &config.blocks {
            convs.push(RConv::new(in_ch, *spec));
            in_ch = spec.out_channels;
        }
        Ok(Discriminator {
            config,
            convs,
            act_inputs: Vec::new(),
            probs: None,
        })
    }

    /// DCGAN initialization: weights ~ N(0, 0.02), zero biases.
    pub fn init_params<R: Rng>(&mut self, rng: &mut R) {
        let normal = Normal::new(0.0, 0.02).expect("valid stddev");
        for conv in &mut self.convs {
            for w in &mut conv.w {
                *w = normal.sample(rng);
            }
            for b in &mut conv.b {
                *b = 0.0;
            }
        }
    }

    pub fn config(&self) -> &DiscriminatorConfig {
        &self.config
    }

    /// Probabilities in (0,1) for a batch of images.
    pub fn forward_probs(&mut self, xs: &[RTensor]) -> Result<Vec<f64>> {
        for x in xs {
            if x.shape() != (self.config.in_channels, self.config.image_side, self.config.image_side)
            {
                return Err(Error::config(format!(
                    "discriminator expects {}x{side}x{side} images, got {:?}",
                    self.config.in_channels,
                    x.shape(),
                    side = self.config.image_side
                )));
            }
        }
        let alpha = self.config.leaky_alpha;
        self.act_inputs.clear();
        let mut t: Vec<RTensor> = xs.to_vec();
        let last = self.convs.len() - 1;
        for (i, conv) in self.convs.iter_mut().enumerate() {
            t = conv.forward_batch(&t)?;
            if i < last {
                self.act_inputs.push(t.clone());
                for item in &mut t {
                    for v in item.data_mut() {
                        if *v < 0.0 {
                            *v *= alpha;
                        }
                    }
                }
            }
        }
        let probs: Vec<f64> = t.iter().map(|logit| sigmoid(logit.get(0, 0, 0))).collect();
        self.probs = Some(probs.clone());
        Ok(probs)
    }

    /// Backward from `d(loss)/d(probability)` seeds; accumulates weight
    /// gradients and returns gradients with respect to the input images.
    pub fn backward_probs(&mut self, d_probs: &[f64]) -> Result<Vec<RTensor>> {
        let probs = self
            .probs
            .as_ref()
            .ok_or(Error::Usage("discriminator backward called before forward"))?;
        if d_probs.len() != probs.len() {
            return Err(Error::config("gradient batch size mismatch"));
        }
        let alpha = self.config.leaky_alpha;
        // Through the sigmoid: d(logit) = d(p) * p * (1 - p).
        let mut g: Vec<RTensor> = probs
            .iter()
            .zip(d_probs)
            .map(|(&p, &dp)| {
                let mut t = RTensor::zeros(1, 1, 1);
                t.set(0, 0, 0, dp * p * (1.0 - p));
                t
            })
            .collect();
        for i in (0..self.convs.len()).rev() {
            if i < self.convs.len() - 1 {
                let pre = &self.act_inputs[i];
                for (item, pre_item) in g.iter_mut().zip(pre) {
                    for (gv, &xv) in item.data_mut().iter_mut().zip(pre_item.data()) {
                        if xv < 0.0 {
                            *gv *= alpha;
                        }
                    }
                }
            }
            g = self.convs[i].backward_batch(&g)?;
        }
        Ok(g)
    }
}

impl DiffBlock for Discriminator {
    type Tensor = RTensor;

    fn forward(&mut self, xs: &[RTensor], _train: bool) -> Result<Vec<RTensor>> {
        let probs = self.forward_probs(xs)?;
        Ok(probs
            .into_iter()
            .map(|p| {
                let mut t = RTensor::zeros(1, 1, 1);
                t.set(0, 0, 0, p);
                t
            })
            .collect())
    }

    fn backward(&mut self, d_out: &[RTensor]) -> Result<Vec<RTensor>> {
        let seeds: Vec<f64> = d_out.iter().map(|t| t.get(0, 0, 0)).collect();
        self.backward_probs(&seeds)
    }

    fn param_len(&self) -> usize {
        self.convs.iter().map(|c| c.param_len()).sum()
    }

    fn param(&self, mut i: usize) -> f64 {
        for conv in &self.convs {
            if i < conv.w.len() {
                return conv.w[i];
            }
            i -= conv.w.len();
            if i < conv.b.len() {
                return conv.b[i];
            }
            i -= conv.b.len();
        }
        unreachable!("parameter index out of range")
    }

    fn set_param(&mut self, mut i: usize, v: f64) {
        for conv in &mut self.convs {
            if i < conv.w.len() {
                conv.w[i] = v;
                return;
            }
            i -= conv.w.len();
            if i < conv.b.len() {
                conv.b[i] = v;
                return;
            }
            i -= conv.b.len();
        }
        unreachable!("parameter index out of range")
    }

    fn param_grad(&self, mut i: usize) -> f64 {
        for conv in &self.convs {
            if i < conv.d_w.len() {
                return conv.d_w[i];
            }
            i -= conv.d_w.len();
            if i < conv.d_b.len() {
                return conv.d_b[i];
            }
            i -= conv.d_b.len();
        }
        unreachable!("parameter index out of range")
    }

    fn zero_grads(&mut self) {
        for conv in &mut self.convs {
            conv.d_w.iter_mut().for_each(|v| *v = 0.0);
            conv.d_b.iter_mut().for_each(|v| *v = 0.0);
        }
    }
}

/// Raw layer views for checkpoint serialization.
impl Discriminator {
    pub(crate) fn layer_weights(&self) -> Vec<(&[f64], &[f64])> {
        self.convs.iter().map(|c| (&c.w[..], &c.b[..])).collect()
    }

    pub(crate) fn set_layer_weights(&mut self, layers: Vec<(Vec<f64>, Vec<f64>)>) -> Result<()> {
        if layers.len() != self.convs.len() {
            return Err(Error::Checkpoint("discriminator layer count mismatch".into()));
        }
        for (conv, (w, b)) in self.convs.iter_mut().zip(layers) {
            if w.len() != conv.w.len() || b.len() != conv.b.len() {
                return Err(Error::Checkpoint("discriminator weight shape mismatch".into()));
            }
            conv.w = w;
            conv.b = b;
        }
        Ok(())
    }
}
