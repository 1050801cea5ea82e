//! Image and dataset ingestion plus synthetic dataset generation.
//! Checkpoint persistence lives with the training state in [`crate::gan`].

pub mod image;
pub mod synth;

pub use image::{
    byte_to_unit, load_image, load_mask, quantize, save_image, save_mask, to_metric_scale,
    unit_to_byte,
};
pub use synth::{synth_dataset, SynthKind, SynthSpec};

use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::QTensor;

/// In-memory dataset of equally sized single-channel quaternion images.
#[derive(Clone, Debug)]
pub struct Dataset {
    images: Vec<QTensor>,
    height: usize,
    width: usize,
}

impl Dataset {
    pub fn from_images(images: Vec<QTensor>) -> Result<Self> {
        let first = images
            .first()
            .ok_or_else(|| Error::config("dataset needs at least one image"))?;
        let (c, height, width) = first.shape();
        if c != 1 {
            return Err(Error::config("dataset images must be single quaternion channel"));
        }
        for img in &images {
            if img.shape() != (1, height, width) {
                return Err(Error::config("dataset images must all share one size"));
            }
        }
        Ok(Dataset {
            images,
            height,
            width,
        })
    }

    /// Load every `.png` in a directory, sorted by filename for
    /// reproducibility.
    pub fn load_dir(dir: &Path) -> Result<Self> {
        let mut paths: Vec<_> = std::fs::read_dir(dir)
            .map_err(|e| Error::io(dir, e))?
            .filter_map(|entry| entry.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|e| e.eq_ignore_ascii_case("png")))
            .collect();
        paths.sort();
        if paths.is_empty() {
            return Err(Error::config(format!("no .png files in {}", dir.display())));
        }
        let images: Vec<QTensor> = paths.iter().map(|p| load_image(p)).collect::<Result<_>>()?;
        Dataset::from_images(images)
    }

    pub fn synthetic(spec: &SynthSpec) -> Result<Self> {
        Dataset::from_images(synth_dataset(spec))
    }

    pub fn images(&self) -> &[QTensor] {
        &self.images
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dataset_shape_checks() {
        assert!(Dataset::from_images(vec![]).is_err());
        let a = QTensor::zeros(1, 8, 8);
        let b = QTensor::zeros(1, 4, 4);
        assert!(Dataset::from_images(vec![a.clone(), b]).is_err());
        let d = Dataset::from_images(vec![a.clone(), a]).unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!((d.height(), d.width()), (8, 8));
    }

    #[test]
    fn directory_roundtrip_is_sorted_and_complete() {
        let dir = tempfile::tempdir().unwrap();
        let spec = SynthSpec {
            kind: SynthKind::GradientPairs,
            side: 16,
            count: 4,
            seed: 9,
        };
        let images = synth_dataset(&spec);
        for (i, img) in images.iter().enumerate() {
            save_image(img, &dir.path().join(format!("img_{i:03}.png"))).unwrap();
        }
        let loaded = Dataset::load_dir(dir.path()).unwrap();
        assert_eq!(loaded.len(), 4);
        // PNG quantization loses at most half a step per channel.
        for (a, b) in images.iter().zip(loaded.images()) {
            for (x, y) in a.data().iter().zip(b.data()) {
                assert!((x - y).abs() <= 1.0 / 255.0);
            }
        }
    }
}
