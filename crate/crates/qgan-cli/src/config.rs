//! Flat run configuration: a TOML file with a fixed key set, overridden by
//! command-line flags, echoed back into every output directory so a run can
//! be reproduced from its artifacts alone.

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use qgan_core::dataio::{SynthKind, SynthSpec};
use qgan_core::gan::{DiscriminatorConfig, GeneratorConfig, TrainConfig};
use qgan_core::inpaint::InpaintConfig;

/// Fully-resolved configuration; every field has a value.
#[derive(Clone, Debug, Serialize)]
pub struct RunConfig {
    pub seed: u64,
    pub image_side: usize,
    pub latent_dim: usize,
    pub gen_base_channels: usize,
    pub disc_base_channels: usize,
    pub batch_size: usize,
    pub iterations: u64,
    pub lr_g: f64,
    pub lr_d: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub bn_epsilon: f64,
    pub bn_momentum: f64,
    pub checkpoint_every: u64,
    pub synth_kind: String,
    pub synth_count: usize,
    pub lambda: f64,
    pub inpaint_iterations: u64,
    pub latent_lr: f64,
    pub inpaint_beta1: f64,
    pub inpaint_beta2: f64,
    pub window_radius: usize,
    pub poisson: bool,
    pub hole_metrics: bool,
    pub mask_kind: String,
    pub mask_frac: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 1,
            image_side: 32,
            latent_dim: 64,
            gen_base_channels: 6,
            disc_base_channels: 12,
            batch_size: 8,
            iterations: 2000,
            lr_g: 2e-4,
            lr_d: 2e-4,
            adam_beta1: 0.5,
            adam_beta2: 0.999,
            bn_epsilon: 1e-5,
            bn_momentum: 0.1,
            checkpoint_every: 0,
            synth_kind: "gradient-pairs".into(),
            synth_count: 64,
            lambda: 0.003,
            inpaint_iterations: 1000,
            latent_lr: 0.1,
            inpaint_beta1: 0.9,
            inpaint_beta2: 0.999,
            window_radius: 3,
            poisson: true,
            hole_metrics: false,
            mask_kind: "center".into(),
            mask_frac: f64::NAN, // resolved from mask_kind when not set
        }
    }
}

/// The on-disk key set; unknown keys are rejected.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    seed: Option<u64>,
    image_side: Option<usize>,
    latent_dim: Option<usize>,
    gen_base_channels: Option<usize>,
    disc_base_channels: Option<usize>,
    batch_size: Option<usize>,
    iterations: Option<u64>,
    lr_g: Option<f64>,
    lr_d: Option<f64>,
    adam_beta1: Option<f64>,
    adam_beta2: Option<f64>,
    bn_epsilon: Option<f64>,
    bn_momentum: Option<f64>,
    checkpoint_every: Option<u64>,
    synth_kind: Option<String>,
    synth_count: Option<usize>,
    lambda: Option<f64>,
    inpaint_iterations: Option<u64>,
    latent_lr: Option<f64>,
    inpaint_beta1: Option<f64>,
    inpaint_beta2: Option<f64>,
    window_radius: Option<usize>,
    poisson: Option<bool>,
    hole_metrics: Option<bool>,
    mask_kind: Option<String>,
    mask_frac: Option<f64>,
}

macro_rules! merge {
    ($cfg:ident, $raw:ident, $($field:ident),* $(,)?) => {
        $(if let Some(v) = $raw.$field { $cfg.$field = v; })*
    };
}

impl RunConfig {
    /// Defaults, overlaid with the TOML file when given.
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let mut cfg = RunConfig::default();
        if let Some(p) = path {
            let text =
                fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
            let raw: RawConfig =
                toml::from_str(&text).with_context(|| format!("parsing config {}", p.display()))?;
            merge!(
                cfg, raw, seed, image_side, latent_dim, gen_base_channels, disc_base_channels,
                batch_size, iterations, lr_g, lr_d, adam_beta1, adam_beta2, bn_epsilon,
                bn_momentum, checkpoint_every, synth_kind, synth_count, lambda,
                inpaint_iterations, latent_lr, inpaint_beta1, inpaint_beta2, window_radius,
                poisson, hole_metrics, mask_kind, mask_frac,
            );
        }
        Ok(cfg)
    }

    /// Default missing-pixel fraction for the configured mask kind.
    pub fn resolved_mask_frac(&self) -> f64 {
        if self.mask_frac.is_nan() {
            match self.mask_kind.as_str() {
                "diag" => 0.36,
                _ => 0.16,
            }
        } else {
            self.mask_frac
        }
    }

    pub fn to_toml(&self) -> Result<String> {
        let mut resolved = self.clone();
        resolved.mask_frac = self.resolved_mask_frac();
        toml::to_string_pretty(&resolved).context("serializing resolved config")
    }

    pub fn generator_config(&self) -> qgan_core::Result<GeneratorConfig> {
        let mut cfg =
            GeneratorConfig::desk_scale(self.latent_dim, self.image_side, self.gen_base_channels)?;
        cfg.bn_epsilon = self.bn_epsilon;
        cfg.bn_momentum = self.bn_momentum;
        Ok(cfg)
    }

    pub fn discriminator_config(&self) -> qgan_core::Result<DiscriminatorConfig> {
        DiscriminatorConfig::desk_scale(self.image_side, self.disc_base_channels)
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            iterations: self.iterations,
            batch_size: self.batch_size,
            seed: self.seed,
            lr_g: self.lr_g,
            lr_d: self.lr_d,
            adam_beta1: self.adam_beta1,
            adam_beta2: self.adam_beta2,
            checkpoint_every: self.checkpoint_every,
        }
    }

    pub fn inpaint_config(&self) -> InpaintConfig {
        InpaintConfig {
            lambda: self.lambda,
            iterations: self.inpaint_iterations,
            latent_lr: self.latent_lr,
            adam_beta1: self.inpaint_beta1,
            adam_beta2: self.inpaint_beta2,
            window_radius: self.window_radius,
            poisson: self.poisson,
            seed: self.seed,
        }
    }

    pub fn synth_spec(&self) -> Result<SynthSpec> {
        let kind: SynthKind = self
            .synth_kind
            .parse()
            .map_err(|e: String| anyhow::anyhow!(e))?;
        Ok(SynthSpec {
            kind,
            side: self.image_side,
            count: self.synth_count,
            seed: self.seed,
        })
    }
}
