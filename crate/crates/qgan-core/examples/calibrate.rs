// Scratch calibration for the desk-scale training + inpainting pipeline.
use qgan_core::dataio::{quantize, to_metric_scale, SynthKind, SynthSpec};
use qgan_core::gan::{train, DiscriminatorConfig, Gan, GeneratorConfig, TrainConfig, TrainSinks};
use qgan_core::inpaint::{blend, inpaint_image, make_center_mask, make_diag_mask, InpaintConfig, Mask};
use qgan_core::metrics::{psnr, psnr_capped};
use qgan_core::qalgebra::PureQuaternion;
use qgan_core::tensor::QTensor;
use std::time::Instant;

fn mean_fill(y: &QTensor, mask: &Mask) -> QTensor {
    let mut sum = PureQuaternion::ZERO;
    let mut n = 0.0;
    for i in 0..y.height() {
        for j in 0..y.width() {
            if mask.observed(i, j) {
                sum += y.pixel(0, i, j);
                n += 1.0;
            }
        }
    }
    let mean = sum.scaled(1.0 / n);
    let mut out = y.clone();
    for i in 0..y.height() {
        for j in 0..y.width() {
            if !mask.observed(i, j) {
                out.set_pixel(0, i, j, mean);
            }
        }
    }
    out
}

fn main() {
    let iters: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(2000);
    let inp_iters: u64 = std::env::args().nth(2).and_then(|s| s.parse().ok()).unwrap_or(1000);
    let side = 32;
    let train_spec = SynthSpec { kind: SynthKind::GradientPairs, side, count: 64, seed: 1000 };
    let held_spec = SynthSpec { kind: SynthKind::GradientPairs, side, count: 16, seed: 2000 };
    let train_set: Vec<QTensor> = qgan_core::dataio::synth_dataset(&train_spec);
    let held: Vec<QTensor> = qgan_core::dataio::synth_dataset(&held_spec);

    for seed in [1u64] {
        let t0 = Instant::now();
        let gcfg = GeneratorConfig::desk_scale(64, side, 6).unwrap();
        let dcfg = DiscriminatorConfig::desk_scale(side, 12).unwrap();
        let tcfg = TrainConfig { iterations: iters, batch_size: 8, seed, ..TrainConfig::default() };
        let mut gan = Gan::new(gcfg, dcfg, &tcfg).unwrap();
        let rows = train(&mut gan, &train_set, &tcfg, &mut TrainSinks::default()).unwrap();
        let tail: Vec<f64> = rows.iter().rev().take(500).map(|r| r.loss_d).collect();
        let tail_mean = tail.iter().sum::<f64>() / tail.len() as f64;
        println!("seed {seed}: trained {iters} iters in {:.1}s, trailing-500 loss_d mean {:.4}",
                 t0.elapsed().as_secs_f64(), tail_mean);

        for (name, mask) in [("center", make_center_mask(side, side, 0.16).unwrap()),
                             ("diag", make_diag_mask(side, side, 0.36).unwrap())] {
            let t1 = Instant::now();
            let mut ours = 0.0;
            let mut base = 0.0;
            for (idx, truth) in held.iter().enumerate() {
                let zeros = QTensor::zeros(1, side, side);
                let y = blend(&mask, truth, &zeros).unwrap();
                let icfg = InpaintConfig { iterations: inp_iters, seed: 3000 + idx as u64, ..InpaintConfig::default() };
                let res = inpaint_image(&y, &mask, &mut gan, &icfg).unwrap();
                let tq = to_metric_scale(truth);
                let p_ours = psnr_capped(psnr(&to_metric_scale(&res.image), &tq, 255.0).unwrap());
                let p_base = psnr_capped(psnr(&to_metric_scale(&mean_fill(&quantize(truth), &mask)), &tq, 255.0).unwrap());
                ours += p_ours; base += p_base;
            }
            ours /= held.len() as f64;
            base /= held.len() as f64;
            println!("  {name}: ours {ours:.2} dB vs mean-fill {base:.2} dB (margin {:.2} dB) in {:.1}s",
                     ours - base, t1.elapsed().as_secs_f64());
        }
    }
}
