//! Binary corruption masks and the neighborhood weight matrix of the
//! context loss.

use crate::error::{Error, Result};

/// H x W binary mask: 1 = observed pixel, 0 = missing.
#[derive(Clone, Debug, PartialEq)]
pub struct Mask {
    height: usize,
    width: usize,
    data: Vec<u8>,
}

impl Mask {
    pub fn all_observed(height: usize, width: usize) -> Self {
        Mask {
            height,
            width,
            data: vec![1; height * width],
        }
    }

    pub fn from_data(height: usize, width: usize, data: Vec<u8>) -> Result<Self> {
        if data.len() != height * width {
            return Err(Error::config("mask data length does not match dimensions"));
        }
        if data.iter().any(|&v| v > 1) {
            return Err(Error::config("mask values must be exactly 0 or 1"));
        }
        if !data.iter().any(|&v| v == 1) {
            return Err(Error::config("mask must keep at least one observed pixel"));
        }
        Ok(Mask {
            height,
            width,
            data,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn observed(&self, h: usize, w: usize) -> bool {
        self.data[h * self.width + w] == 1
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn missing_count(&self) -> usize {
        self.data.iter().filter(|&&v| v == 0).count()
    }

    /// Fraction of missing pixels.
    pub fn missing_fraction(&self) -> f64 {
        self.missing_count() as f64 / (self.height * self.width) as f64
    }
}

/// Centered square hole whose side is chosen by enumeration so the missing
/// fraction lands as close as possible to `target_frac`.
pub fn make_center_mask(height: usize, width: usize, target_frac: f64) -> Result<Mask> {
    if height < 4 || width < 4 {
        return Err(Error::config("center mask needs at least a 4x4 image"));
    }
    if !(0.0..=1.0).contains(&target_frac) {
        return Err(Error::config("target fraction must lie in [0, 1]"));
    }
    let total = (height * width) as f64;
    let max_side = height.min(width);
    let mut best = (f64::INFINITY, 0usize);
    for side in 0..=max_side {
        if side * side >= height * width {
            continue; // would leave no observed pixel
        }
        let frac = (side * side) as f64 / total;
        let err = (frac - target_frac).abs();
        if err < best.0 {
            best = (err, side);
        }
    }
    let side = best.1;
    let top = (height - side) / 2;
    let left = (width - side) / 2;
    let mut data = vec![1u8; height * width];
    for h in top..top + side {
        for w in left..left + side {
            data[h * width + w] = 0;
        }
    }
    Mask::from_data(height, width, data)
}

/// Diagonal band hole `|i - j| <= half_width` from top-left to bottom-right,
/// with the half-width swept so the missing fraction lands closest to
/// `target_frac`. Requires a square image.
pub fn make_diag_mask(height: usize, width: usize, target_frac: f64) -> Result<Mask> {
    if height != width {
        return Err(Error::config("diagonal mask requires a square image"));
    }
    if height < 4 {
        return Err(Error::config("diagonal mask needs at least a 4x4 image"));
    }
    if !(0.0..=1.0).contains(&target_frac) {
        return Err(Error::config("target fraction must lie in [0, 1]"));
    }
    let n = height;
    let total = (n * n) as f64;
    let band_count = |hw: isize| -> usize {
        if hw < 0 {
            return 0;
        }
        let mut count = 0usize;
        for i in 0..n {
            for j in 0..n {
                if (i as isize - j as isize).abs() <= hw {
                    count += 1;
                }
            }
        }
        count
    };
    let mut best = (f64::INFINITY, -1isize);
    for hw in -1..n as isize {
        let missing = band_count(hw);
        if missing >= n * n {
            continue;
        }
        let err = (missing as f64 / total - target_frac).abs();
        if err < best.0 {
            best = (err, hw);
        }
    }
    let hw = best.1;
    let mut data = vec![1u8; n * n];
    if hw >= 0 {
        for i in 0..n {
            for j in 0..n {
                if (i as isize - j as isize).abs() <= hw {
                    data[i * n + j] = 0;
                }
            }
        }
    }
    Mask::from_data(n, n, data)
}

/// Non-negative per-pixel weights of the context loss: zero on missing
/// pixels, otherwise the fraction of missing neighbors in the
/// `(2r+1) x (2r+1)` window around the pixel (center excluded, clipped at
/// the borders).
#[derive(Clone, Debug, PartialEq)]
pub struct WeightMatrix {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl WeightMatrix {
    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn get(&self, h: usize, w: usize) -> f64 {
        self.data[h * self.width + w]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }
}

pub fn weight_matrix(mask: &Mask, radius: usize) -> Result<WeightMatrix> {
    if radius == 0 {
        return Err(Error::config("weight window radius must be at least 1"));
    }
    let (height, width) = (mask.height(), mask.width());
    let r = radius as isize;
    let mut data = vec![0.0; height * width];
    for i in 0..height {
        for j in 0..width {
            if !mask.observed(i, j) {
                continue;
            }
            let mut neighbors = 0usize;
            let mut missing = 0usize;
            for di in -r..=r {
                for dj in -r..=r {
                    if di == 0 && dj == 0 {
                        continue;
                    }
                    let (p, q) = (i as isize + di, j as isize + dj);
                    if p < 0 || q < 0 || p >= height as isize || q >= width as isize {
                        continue;
                    }
                    neighbors += 1;
                    if !mask.observed(p as usize, q as usize) {
                        missing += 1;
                    }
                }
            }
            if neighbors > 0 {
                data[i * width + j] = missing as f64 / neighbors as f64;
            }
        }
    }
    Ok(WeightMatrix {
        height,
        width,
        data,
    })
}
