//! `qgan`: train quaternion GANs, inpaint color images by latent-space
//! optimization, and evaluate the results.

mod commands;
mod config;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(
    name = "qgan",
    version,
    about = "Quaternion GAN training and semantic color-image inpainting"
)]
pub struct Cli {
    #[command(subcommand)]
    pub cmd: Cmd,
}

#[derive(Subcommand)]
pub enum Cmd {
    /// Train a quaternion GAN; writes loss.csv, checkpoint.qgck, config.toml
    Train(TrainArgs),
    /// Inpaint a directory of images with a trained checkpoint
    Inpaint(InpaintArgs),
    /// PSNR/SSIM for pairs of images matched by filename across two directories
    Eval(EvalArgs),
    /// Finite-difference gradient checks for every layer type; exit 0 iff all pass
    Gradcheck(GradcheckArgs),
    /// Generate a center or diagonal corruption mask PNG
    Maskgen(MaskgenArgs),
    /// Generate a synthetic dataset directory
    Synth(SynthArgs),
}

#[derive(Args)]
pub struct TrainArgs {
    /// Output directory
    #[arg(long)]
    pub out: PathBuf,
    /// TOML run configuration; flags take precedence over file values
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Directory of 8-bit RGB training PNGs (omit to train on the synthetic set)
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// RNG seed
    #[arg(long)]
    pub seed: Option<u64>,
    /// Training iterations
    #[arg(long)]
    pub iters: Option<u64>,
    /// Images per training batch
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Square image side in pixels
    #[arg(long)]
    pub image_side: Option<usize>,
    /// Checkpoint cadence in iterations (0 = final only)
    #[arg(long)]
    pub checkpoint_every: Option<u64>,
}

#[derive(Args)]
pub struct InpaintArgs {
    /// Output directory
    #[arg(long)]
    pub out: PathBuf,
    /// Trained checkpoint file
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Directory of input PNGs (originals by default; see --corrupted)
    #[arg(long)]
    pub images: PathBuf,
    /// TOML run configuration; flags take precedence over file values
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Mask PNG (0 = missing, 255 = observed); overrides --mask-kind
    #[arg(long)]
    pub mask: Option<PathBuf>,
    /// Generated mask kind: center or diag
    #[arg(long)]
    pub mask_kind: Option<String>,
    /// Target missing-pixel fraction for the generated mask
    #[arg(long)]
    pub mask_frac: Option<f64>,
    /// Inputs are already corrupted; skip the masking step
    #[arg(long)]
    pub corrupted: bool,
    /// Ground-truth directory for metrics when inputs are pre-corrupted
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Latent-descent iterations per image
    #[arg(long)]
    pub iters: Option<u64>,
    /// Base RNG seed (per-image seeds are seed + image index)
    #[arg(long)]
    pub seed: Option<u64>,
    /// Prior-loss weight
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Adam learning rate on the latent vector
    #[arg(long)]
    pub latent_lr: Option<f64>,
    /// Skip Poisson fusion (plain blending only)
    #[arg(long)]
    pub no_poisson: bool,
    /// Score only the hole region instead of the full image
    #[arg(long)]
    pub hole_metrics: bool,
}

#[derive(Args)]
pub struct EvalArgs {
    /// First image directory
    #[arg(long)]
    pub a: PathBuf,
    /// Second image directory (files matched by name)
    #[arg(long)]
    pub b: PathBuf,
    /// Metrics CSV path (stdout when omitted)
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct GradcheckArgs {
    /// RNG seed for the probe inputs
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum MaskField {
    Center,
    Diag,
}

#[derive(Args)]
pub struct MaskgenArgs {
    /// Output PNG path
    #[arg(long)]
    pub out: PathBuf,
    /// Mask kind
    #[arg(long, value_enum)]
    pub kind: MaskField,
    /// Square image side in pixels
    #[arg(long)]
    pub size: usize,
    /// Target missing fraction (defaults: center 0.16, diag 0.36)
    #[arg(long)]
    pub frac: Option<f64>,
}

#[derive(Args)]
pub struct SynthArgs {
    /// Output directory
    #[arg(long)]
    pub out: PathBuf,
    /// TOML run configuration; flags take precedence over file values
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Image family: gradient-pairs or colored-shapes
    #[arg(long)]
    pub kind: Option<String>,
    /// Square image side in pixels
    #[arg(long)]
    pub side: Option<usize>,
    /// Number of images
    #[arg(long)]
    pub count: Option<usize>,
    /// RNG seed
    #[arg(long)]
    pub seed: Option<u64>,
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = commands::run(cli) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
