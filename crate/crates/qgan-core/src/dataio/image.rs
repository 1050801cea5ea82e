//! PNG ingestion and the 8-bit <-> [-1, 1] pixel mapping.
//!
//! A stored byte `u` maps to `2u/255 - 1`; writing inverts with
//! round-half-up after clamping, so the composed map is a bijection between
//! 8-bit triples and their quantized lattice points.

use std::path::Path;

use image::{DynamicImage, GrayImage, RgbImage};

use crate::error::{Error, Result};
use crate::inpaint::Mask;
use crate::qalgebra::PureQuaternion;
use crate::tensor::QTensor;

#[inline]
pub fn byte_to_unit(u: u8) -> f64 {
    2.0 * u as f64 / 255.0 - 1.0
}

#[inline]
pub fn unit_to_byte(v: f64) -> u8 {
    let scaled = (v.clamp(-1.0, 1.0) + 1.0) * 127.5;
    (scaled + 0.5).floor().clamp(0.0, 255.0) as u8
}

/// Load an 8-bit RGB PNG as a one-channel quaternion image.
pub fn load_image(path: &Path) -> Result<QTensor> {
    let img = image::open(path).map_err(|e| Error::Image {
        path: path.to_path_buf(),
        source: e,
    })?;
    let rgb = match img {
        DynamicImage::ImageRgb8(buf) => buf,
        other => {
            return Err(Error::config(format!(
                "{} is not an 8-bit RGB image (found {:?})",
                path.display(),
                other.color()
            )))
        }
    };
    let (w, h) = (rgb.width() as usize, rgb.height() as usize);
    let mut out = QTensor::zeros(1, h, w);
    for (x, y, p) in rgb.enumerate_pixels() {
        out.set_pixel(
            0,
            y as usize,
            x as usize,
            PureQuaternion::new(byte_to_unit(p[0]), byte_to_unit(p[1]), byte_to_unit(p[2])),
        );
    }
    Ok(out)
}

/// Save a one-channel quaternion image as an 8-bit RGB PNG.
pub fn save_image(img: &QTensor, path: &Path) -> Result<()> {
    if img.channels() != 1 {
        return Err(Error::config("only single-channel quaternion images can be saved"));
    }
    let (h, w) = (img.height(), img.width());
    let mut rgb = RgbImage::new(w as u32, h as u32);
    for y in 0..h {
        for x in 0..w {
            let p = img.pixel(0, y, x);
            rgb.put_pixel(
                x as u32,
                y as u32,
                image::Rgb([unit_to_byte(p.x), unit_to_byte(p.y), unit_to_byte(p.z)]),
            );
        }
    }
    rgb.save(path).map_err(|e| Error::Image {
        path: path.to_path_buf(),
        source: e,
    })
}

/// Snap every component to the 8-bit lattice (the exact values a PNG
/// round-trip would produce); metrics are computed on these.
pub fn quantize(img: &QTensor) -> QTensor {
    img.map(|v| byte_to_unit(unit_to_byte(v)))
}

/// Map a [-1, 1] image onto the continuous [0, 255] scale after 8-bit
/// quantization, for metrics in the conventional PSNR/SSIM range.
pub fn to_metric_scale(img: &QTensor) -> QTensor {
    img.map(|v| unit_to_byte(v) as f64)
}

/// Load an 8-bit grayscale mask PNG: 0 = missing, 255 = observed.
pub fn load_mask(path: &Path) -> Result<Mask> {
    let img = image::open(path).map_err(|e| Error::Image {
        path: path.to_path_buf(),
        source: e,
    })?;
    let gray: GrayImage = match img {
        DynamicImage::ImageLuma8(buf) => buf,
        other => {
            return Err(Error::config(format!(
                "{} is not an 8-bit grayscale mask (found {:?})",
                path.display(),
                other.color()
            )))
        }
    };
    let (w, h) = (gray.width() as usize, gray.height() as usize);
    let mut data = vec![0u8; h * w];
    for (x, y, p) in gray.enumerate_pixels() {
        data[y as usize * w + x as usize] = match p[0] {
            0 => 0,
            255 => 1,
            v => {
                return Err(Error::config(format!(
                    "mask {} holds value {v}; only 0 and 255 are allowed",
                    path.display()
                )))
            }
        };
    }
    Mask::from_data(h, w, data)
}

/// Save a mask as an 8-bit grayscale PNG: 0 = missing, 255 = observed.
pub fn save_mask(mask: &Mask, path: &Path) -> Result<()> {
    let (h, w) = (mask.height(), mask.width());
    let mut gray = GrayImage::new(w as u32, h as u32);
    for y in 0..h {
        for x in 0..w {
            gray.put_pixel(
                x as u32,
                y as u32,
                image::Luma([if mask.observed(y, x) { 255 } else { 0 }]),
            );
        }
    }
    gray.save(path).map_err(|e| Error::Image {
        path: path.to_path_buf(),
        source: e,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inpaint::make_center_mask;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn black_and_midgray_pixels_map_as_documented() {
        assert_eq!(byte_to_unit(0), -1.0);
        assert_eq!(byte_to_unit(255), 1.0);
        let mid = byte_to_unit(128);
        assert!((mid - (2.0 * 128.0 / 255.0 - 1.0)).abs() < 1e-15);
        assert!((mid - 0.00392).abs() < 1e-4);
        assert_eq!(unit_to_byte(mid), 128);
    }

    #[test]
    fn byte_mapping_is_a_bijection_on_the_lattice() {
        for u in 0..=255u8 {
            assert_eq!(unit_to_byte(byte_to_unit(u)), u);
        }
    }

    #[test]
    fn save_load_save_is_a_fixpoint() {
        let dir = tempfile::tempdir().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(101);
        let data: Vec<f64> = (0..6 * 6 * 3).map(|_| rng.gen_range(-1.2..1.2)).collect();
        let img = QTensor::from_data(1, 6, 6, data).unwrap();

        let p1 = dir.path().join("a.png");
        let p2 = dir.path().join("b.png");
        save_image(&img, &p1).unwrap();
        let loaded = load_image(&p1).unwrap();
        save_image(&loaded, &p2).unwrap();
        assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());

        // Round-trip error is at most one quantization step per channel.
        for (a, b) in img.data().iter().zip(loaded.data()) {
            assert!((a.clamp(-1.0, 1.0) - b).abs() <= 1.0 / 255.0 + 1e-12);
        }
    }

    #[test]
    fn non_rgb_input_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("gray.png");
        let gray = GrayImage::new(4, 4);
        gray.save(&path).unwrap();
        assert!(matches!(load_image(&path), Err(Error::Config(_))));
        assert!(matches!(load_image(Path::new("/nonexistent.png")), Err(Error::Image { .. })));
    }

    #[test]
    fn mask_png_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("mask.png");
        let mask = make_center_mask(16, 16, 0.16).unwrap();
        save_mask(&mask, &path).unwrap();
        let loaded = load_mask(&path).unwrap();
        assert_eq!(loaded, mask);
    }
}
