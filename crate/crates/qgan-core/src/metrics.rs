//! Image quality metrics: PSNR and mean local SSIM over the three color
//! planes of quaternion images.

use crate::error::{Error, Result};
use crate::inpaint::Mask;
use crate::tensor::QTensor;

/// Reported PSNR is capped here for identical images.
pub const PSNR_CAP_DB: f64 = 100.0;

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;

fn check_shapes(a: &QTensor, b: &QTensor) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::config(format!(
            "metric image shapes differ: {:?} vs {:?}",
            a.shape(),
            b.shape()
        )));
    }
    if a.channels() != 1 {
        return Err(Error::config("metrics expect single-quaternion-channel images"));
    }
    Ok(())
}

/// `10 log10(max_val^2 / MSE)` with the squared error pooled over the three
/// planes; identical images return the infinity sentinel.
pub fn psnr(a: &QTensor, b: &QTensor, max_val: f64) -> Result<f64> {
    check_shapes(a, b)?;
    let mse = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        / a.data().len() as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (max_val * max_val / mse).log10())
}

/// PSNR over the missing pixels only.
pub fn psnr_masked(a: &QTensor, b: &QTensor, max_val: f64, mask: &Mask) -> Result<f64> {
    check_shapes(a, b)?;
    if mask.height() != a.height() || mask.width() != a.width() {
        return Err(Error::config("mask does not match the images"));
    }
    let mut sum = 0.0;
    let mut count = 0usize;
    for i in 0..a.height() {
        for j in 0..a.width() {
            if mask.observed(i, j) {
                continue;
            }
            let d = a.pixel(0, i, j) - b.pixel(0, i, j);
            sum += d.norm_sq();
            count += 3;
        }
    }
    if count == 0 {
        return Err(Error::domain("mask has no missing pixels to score"));
    }
    let mse = sum / count as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (max_val * max_val / mse).log10())
}

/// Cap the PSNR sentinel for CSV reporting.
pub fn psnr_capped(value: f64) -> f64 {
    value.min(PSNR_CAP_DB)
}

fn gaussian_window() -> Vec<f64> {
    let half = (SSIM_WINDOW / 2) as isize;
    let mut w = Vec::with_capacity(SSIM_WINDOW * SSIM_WINDOW);
    let mut sum = 0.0;
    for i in -half..=half {
        for j in -half..=half {
            let v = (-((i * i + j * j) as f64) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
            w.push(v);
            sum += v;
        }
    }
    for v in &mut w {
        *v /= sum;
    }
    w
}

fn plane_of(t: &QTensor, comp: usize) -> Vec<f64> {
    let (h, w) = (t.height(), t.width());
    let mut out = Vec::with_capacity(h * w);
    for i in 0..h {
        for j in 0..w {
            let p = t.pixel(0, i, j);
            out.push([p.x, p.y, p.z][comp]);
        }
    }
    out
}

fn local_ssim(
    a: &[f64],
    b: &[f64],
    width: usize,
    window: &[f64],
    ci: usize,
    cj: usize,
    c1: f64,
    c2: f64,
) -> f64 {
    let half = SSIM_WINDOW / 2;
    let (mut ma, mut mb) = (0.0, 0.0);
    let mut idx = 0usize;
    for i in 0..SSIM_WINDOW {
        for j in 0..SSIM_WINDOW {
            let p = (ci + i - half) * width + (cj + j - half);
            ma += window[idx] * a[p];
            mb += window[idx] * b[p];
            idx += 1;
        }
    }
    let (mut va, mut vb, mut cov) = (0.0, 0.0, 0.0);
    idx = 0;
    for i in 0..SSIM_WINDOW {
        for j in 0..SSIM_WINDOW {
            let p = (ci + i - half) * width + (cj + j - half);
            let da = a[p] - ma;
            let db = b[p] - mb;
            va += window[idx] * da * da;
            vb += window[idx] * db * db;
            cov += window[idx] * da * db;
            idx += 1;
        }
    }
    ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2))
}

fn ssim_over(
    a: &QTensor,
    b: &QTensor,
    max_val: f64,
    keep: impl Fn(usize, usize) -> bool,
) -> Result<f64> {
    check_shapes(a, b)?;
    let (h, w) = (a.height(), a.width());
    if h < SSIM_WINDOW || w < SSIM_WINDOW {
        return Err(Error::config(format!(
            "image {h}x{w} is smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} SSIM window"
        )));
    }
    let window = gaussian_window();
    let c1 = (SSIM_K1 * max_val) * (SSIM_K1 * max_val);
    let c2 = (SSIM_K2 * max_val) * (SSIM_K2 * max_val);
    let half = SSIM_WINDOW / 2;
    let mut total = 0.0;
    let mut count = 0usize;
    for comp in 0..3 {
        let pa = plane_of(a, comp);
        let pb = plane_of(b, comp);
        for ci in half..h - half {
            for cj in half..w - half {
                if !keep(ci, cj) {
                    continue;
                }
                total += local_ssim(&pa, &pb, w, &window, ci, cj, c1, c2);
                count += 1;
            }
        }
    }
    if count == 0 {
        return Err(Error::domain("no SSIM windows fall inside the requested region"));
    }
    Ok(total / count as f64)
}

/// Mean local SSIM (Gaussian 11x11 window, sigma 1.5, K1 = 0.01, K2 = 0.03),
/// computed per color plane over all fully-interior windows and averaged.
pub fn ssim(a: &QTensor, b: &QTensor, max_val: f64) -> Result<f64> {
    ssim_over(a, b, max_val, |_, _| true)
}

/// SSIM restricted to windows centered on missing pixels.
pub fn ssim_masked(a: &QTensor, b: &QTensor, max_val: f64, mask: &Mask) -> Result<f64> {
    if mask.height() != a.height() || mask.width() != a.width() {
        return Err(Error::config("mask does not match the images"));
    }
    ssim_over(a, b, max_val, |i, j| !mask.observed(i, j))
}
