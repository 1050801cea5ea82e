//! Subcommand implementations.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use qgan_core::dataio::{
    load_image, load_mask, save_image, save_mask, synth_dataset, to_metric_scale, Dataset,
};
use qgan_core::gan::{load_checkpoint, train, DiscriminatorConfig, Gan, GeneratorConfig, TrainSinks};
use qgan_core::inpaint::{blend, inpaint_image, make_center_mask, make_diag_mask, Mask};
use qgan_core::metrics::{psnr, psnr_capped, psnr_masked, ssim, ssim_masked};
use qgan_core::qlayers::{gradient_check, ActKind, QBatchNorm, QConv, QConvKernel, QDeconv,
    SplitActivation};
use qgan_core::tensor::{QTensor, RTensor};

use crate::config::RunConfig;
use crate::{
    EvalArgs, GradcheckArgs, InpaintArgs, MaskField, MaskgenArgs, SynthArgs, TrainArgs,
};

pub const METRICS_CSV_HEADER: &str = "image,psnr,ssim,mask_frac,iters";

fn write_config_echo(dir: &Path, cfg: &RunConfig) -> Result<()> {
    let text = cfg.to_toml()?;
    let path = dir.join("config.toml");
    fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn sorted_pngs(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("reading directory {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e.eq_ignore_ascii_case("png")))
        .collect();
    paths.sort();
    if paths.is_empty() {
        bail!("no .png files in {}", dir.display());
    }
    Ok(paths)
}

fn make_mask(kind: &str, height: usize, width: usize, frac: f64) -> Result<Mask> {
    match kind {
        "center" => Ok(make_center_mask(height, width, frac)?),
        "diag" => Ok(make_diag_mask(height, width, frac)?),
        other => bail!("unknown mask kind '{other}' (expected center or diag)"),
    }
}

fn metric_pair(a: &QTensor, b: &QTensor, hole: Option<&Mask>) -> Result<(f64, f64)> {
    let am = to_metric_scale(a);
    let bm = to_metric_scale(b);
    Ok(match hole {
        None => (
            psnr_capped(psnr(&am, &bm, 255.0)?),
            ssim(&am, &bm, 255.0)?,
        ),
        Some(m) => (
            psnr_capped(psnr_masked(&am, &bm, 255.0, m)?),
            ssim_masked(&am, &bm, 255.0, m)?,
        ),
    })
}

pub fn cmd_train(args: &TrainArgs) -> Result<()> {
    let mut cfg = RunConfig::load(args.config.as_deref())?;
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    if let Some(v) = args.iters {
        cfg.iterations = v;
    }
    if let Some(v) = args.batch_size {
        cfg.batch_size = v;
    }
    if let Some(v) = args.image_side {
        cfg.image_side = v;
    }
    if let Some(v) = args.checkpoint_every {
        cfg.checkpoint_every = v;
    }

    fs::create_dir_all(&args.out)
        .with_context(|| format!("creating output directory {}", args.out.display()))?;
    write_config_echo(&args.out, &cfg)?;

    let dataset = match &args.data {
        Some(dir) => {
            let d = Dataset::load_dir(dir)?;
            if d.height() != cfg.image_side || d.width() != cfg.image_side {
                bail!(
                    "dataset images are {}x{}, but the configured image_side is {}",
                    d.height(),
                    d.width(),
                    cfg.image_side
                );
            }
            d
        }
        None => Dataset::synthetic(&cfg.synth_spec()?)?,
    };

    let train_cfg = cfg.train_config();
    let mut gan = Gan::new(cfg.generator_config()?, cfg.discriminator_config()?, &train_cfg)?;

    let loss_path = args.out.join("loss.csv");
    let file = fs::File::create(&loss_path)
        .with_context(|| format!("creating {}", loss_path.display()))?;
    let mut writer = BufWriter::new(file);
    let mut sinks = TrainSinks {
        loss_writer: Some(&mut writer),
        checkpoint_path: Some(args.out.join("checkpoint.qgck")),
        config_echo: cfg.to_toml()?,
    };
    let rows = train(&mut gan, dataset.images(), &train_cfg, &mut sinks)?;
    writer.flush().context("flushing loss.csv")?;

    if let Some(last) = rows.last() {
        println!(
            "trained {} iterations on {} images: loss_d {:.4}, loss_g {:.4}",
            rows.len(),
            dataset.len(),
            last.loss_d,
            last.loss_g
        );
    } else {
        println!("0 iterations requested; wrote the initialization checkpoint");
    }
    println!("outputs in {}", args.out.display());
    Ok(())
}

pub fn cmd_inpaint(args: &InpaintArgs) -> Result<()> {
    let mut cfg = RunConfig::load(args.config.as_deref())?;
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    if let Some(v) = args.iters {
        cfg.inpaint_iterations = v;
    }
    if let Some(v) = args.lambda {
        cfg.lambda = v;
    }
    if let Some(v) = args.latent_lr {
        cfg.latent_lr = v;
    }
    if let Some(v) = &args.mask_kind {
        cfg.mask_kind = v.clone();
    }
    if let Some(v) = args.mask_frac {
        cfg.mask_frac = v;
    }
    if args.no_poisson {
        cfg.poisson = false;
    }
    if args.hole_metrics {
        cfg.hole_metrics = true;
    }

    if !args.checkpoint.exists() {
        bail!("checkpoint {} does not exist", args.checkpoint.display());
    }
    let (mut gan, _echo) = load_checkpoint(&args.checkpoint)?;
    let side = gan.generator.config().output_side()?;

    let paths = sorted_pngs(&args.images)?;

    fs::create_dir_all(&args.out)
        .with_context(|| format!("creating output directory {}", args.out.display()))?;
    write_config_echo(&args.out, &cfg)?;

    let shared_mask = match (&args.mask, &args.mask_kind) {
        (Some(path), _) => Some(load_mask(path)?),
        (None, _) => Some(make_mask(&cfg.mask_kind, side, side, cfg.resolved_mask_frac())?),
    };

    let mut rows = vec![METRICS_CSV_HEADER.to_string()];
    let base_inpaint_cfg = cfg.inpaint_config();
    for (idx, path) in paths.iter().enumerate() {
        let stem = path
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or("image")
            .to_string();
        let loaded = load_image(path)?;
        if loaded.shape() != (1, side, side) {
            bail!(
                "{} is {}x{}, but the checkpointed generator produces {side}x{side}",
                path.display(),
                loaded.height(),
                loaded.width()
            );
        }
        let mask = shared_mask.clone().expect("mask resolved above");

        // By default the inputs are intact originals: corrupt, inpaint, and
        // score against them. With --corrupted they are used as-is and the
        // ground truth (if any) comes from --truth.
        let (y, truth): (QTensor, Option<QTensor>) = if args.corrupted {
            let truth = match &args.truth {
                Some(dir) => {
                    let tp = dir.join(path.file_name().unwrap());
                    Some(load_image(&tp)?)
                }
                None => None,
            };
            (loaded, truth)
        } else {
            let zeros = QTensor::zeros(1, side, side);
            let corrupted = blend(&mask, &loaded, &zeros)?;
            (corrupted, Some(loaded))
        };

        let mut icfg = base_inpaint_cfg.clone();
        icfg.seed = cfg.seed.wrapping_add(idx as u64);
        let result = inpaint_image(&y, &mask, &mut gan, &icfg)?;
        save_image(&result.image, &args.out.join(format!("{stem}_inpainted.png")))?;

        let (p, s) = match &truth {
            Some(t) => {
                let hole = cfg.hole_metrics.then_some(&mask);
                metric_pair(&result.image, t, hole)?
            }
            None => (f64::NAN, f64::NAN),
        };
        rows.push(format!(
            "{stem},{p},{s},{:.6},{}",
            result.mask_fraction, icfg.iterations
        ));
        println!("{stem}: psnr {p:.3}, ssim {s:.4}");
    }

    let csv_path = args.out.join("metrics.csv");
    fs::write(&csv_path, rows.join("\n") + "\n")
        .with_context(|| format!("writing {}", csv_path.display()))?;
    println!("outputs in {}", args.out.display());
    Ok(())
}

pub fn cmd_eval(args: &EvalArgs) -> Result<()> {
    let paths = sorted_pngs(&args.a)?;
    let mut rows = vec![METRICS_CSV_HEADER.to_string()];
    for path in &paths {
        let name = path.file_name().unwrap();
        let other = args.b.join(name);
        if !other.exists() {
            bail!("{} has no counterpart in {}", name.to_string_lossy(), args.b.display());
        }
        let a = load_image(path)?;
        let b = load_image(&other)?;
        let (p, s) = metric_pair(&a, &b, None)?;
        rows.push(format!(
            "{},{p},{s},0,0",
            path.file_stem().unwrap().to_string_lossy()
        ));
    }
    let csv = rows.join("\n") + "\n";
    match &args.out {
        Some(path) => {
            fs::write(path, csv).with_context(|| format!("writing {}", path.display()))?;
            println!("wrote {}", path.display());
        }
        None => print!("{csv}"),
    }
    Ok(())
}

pub fn cmd_gradcheck(args: &GradcheckArgs) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let mut failures = 0usize;
    let mut report = |name: &str, worst: f64, tol: f64| {
        let pass = worst < tol;
        println!(
            "{name}: {} (max rel err {worst:.3e}, tol {tol:.0e})",
            if pass { "PASS" } else { "FAIL" }
        );
        if !pass {
            failures += 1;
        }
    };

    let rand_q = |rng: &mut ChaCha8Rng, m: usize, c: usize, h: usize, w: usize| -> Vec<QTensor> {
        use rand::Rng;
        (0..m)
            .map(|_| {
                let data: Vec<f64> =
                    (0..c * h * w * 3).map(|_| rng.gen_range(-1.0..1.0)).collect();
                QTensor::from_data(c, h, w, data).unwrap()
            })
            .collect()
    };

    {
        let kernel = QConvKernel::random(2, 2, 3, 1, 1, &mut rng)?;
        let mut layer = QConv::new(kernel);
        let xs = rand_q(&mut rng, 2, 2, 5, 5);
        let r = gradient_check(&mut layer, &xs, 1e-5, 1e-4)?;
        report("qconv", r.worst(), r.tol);
    }
    {
        let kernel = QConvKernel::random(2, 2, 4, 2, 1, &mut rng)?;
        let mut layer = QDeconv::new(kernel);
        let xs = rand_q(&mut rng, 2, 2, 3, 3);
        let r = gradient_check(&mut layer, &xs, 1e-5, 1e-4)?;
        report("qdeconv", r.worst(), r.tol);
    }
    {
        let mut layer = QBatchNorm::new(2, 1e-5, 0.1)?;
        let xs = rand_q(&mut rng, 4, 2, 2, 2);
        let r = gradient_check(&mut layer, &xs, 1e-5, 1e-4)?;
        report("qbn", r.worst(), r.tol);
    }
    for (name, kind) in [
        ("leaky_relu", ActKind::LeakyRelu(0.2)),
        ("tanh", ActKind::Tanh),
    ] {
        let mut layer = SplitActivation::new(kind);
        let xs = rand_q(&mut rng, 2, 1, 4, 4);
        let r = gradient_check(&mut layer, &xs, 1e-5, 1e-4)?;
        report(name, r.worst(), r.tol);
    }
    {
        use rand::Rng;
        let mut disc =
            qgan_core::gan::Discriminator::new(DiscriminatorConfig::desk_scale(8, 2)?)?;
        disc.init_params(&mut rng);
        let xs: Vec<RTensor> = (0..2)
            .map(|_| {
                let data: Vec<f64> = (0..3 * 8 * 8).map(|_| rng.gen_range(-1.0..1.0)).collect();
                RTensor::from_data(3, 8, 8, data).unwrap()
            })
            .collect();
        let r = gradient_check(&mut disc, &xs, 1e-5, 1e-4)?;
        report("discriminator", r.worst(), r.tol);
    }
    {
        let mut gen = qgan_core::gan::Generator::new(GeneratorConfig::desk_scale(4, 8, 2)?)?;
        gen.init_params(&mut rng);
        let zs: Vec<QTensor> = (0..2).map(|_| gen.sample_latent(&mut rng)).collect();
        let r = gradient_check(&mut gen, &zs, 1e-5, 1e-3)?;
        report("generator (end-to-end)", r.worst(), r.tol);
    }

    if failures > 0 {
        bail!("{failures} gradient check(s) failed");
    }
    Ok(())
}

pub fn cmd_maskgen(args: &MaskgenArgs) -> Result<()> {
    let frac = args.frac.unwrap_or(match args.kind {
        MaskField::Center => 0.16,
        MaskField::Diag => 0.36,
    });
    let kind = match args.kind {
        MaskField::Center => "center",
        MaskField::Diag => "diag",
    };
    let mask = make_mask(kind, args.size, args.size, frac)?;
    if let Some(parent) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)
            .with_context(|| format!("creating directory {}", parent.display()))?;
    }
    save_mask(&mask, &args.out)?;
    println!(
        "{kind} mask {size}x{size}: achieved missing fraction {frac:.4} -> {path}",
        size = args.size,
        frac = mask.missing_fraction(),
        path = args.out.display()
    );
    Ok(())
}

pub fn cmd_synth(args: &SynthArgs) -> Result<()> {
    let mut cfg = RunConfig::load(args.config.as_deref())?;
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    if let Some(v) = args.side {
        cfg.image_side = v;
    }
    if let Some(v) = args.count {
        cfg.synth_count = v;
    }
    if let Some(v) = &args.kind {
        cfg.synth_kind = v.clone();
    }
    fs::create_dir_all(&args.out)
        .with_context(|| format!("creating output directory {}", args.out.display()))?;
    write_config_echo(&args.out, &cfg)?;
    let spec = cfg.synth_spec()?;
    let images = synth_dataset(&spec);
    for (i, img) in images.iter().enumerate() {
        save_image(img, &args.out.join(format!("img_{i:04}.png")))?;
    }
    println!(
        "wrote {} {}x{} images to {}",
        images.len(),
        spec.side,
        spec.side,
        args.out.display()
    );
    Ok(())
}

pub fn run(cli: crate::Cli) -> Result<()> {
    match &cli.cmd {
        crate::Cmd::Train(args) => cmd_train(args),
        crate::Cmd::Inpaint(args) => cmd_inpaint(args),
        crate::Cmd::Eval(args) => cmd_eval(args),
        crate::Cmd::Gradcheck(args) => cmd_gradcheck(args),
        crate::Cmd::Maskgen(args) => cmd_maskgen(args),
        crate::Cmd::Synth(args) => cmd_synth(args),
    }
    .map_err(|e| anyhow!(e))
}
