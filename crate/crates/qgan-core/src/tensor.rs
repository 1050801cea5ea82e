//! Dense feature-map containers: a quaternion tensor whose pixels are pure
//! quaternions (three real planes per channel) and a plain real tensor used
//! by the discriminator.

use crate::error::{Error, Result};
use crate::qalgebra::PureQuaternion;

/// Channels x height x width grid of pure-quaternion pixels.
///
/// Storage is a flat `Vec<f64>` with the three imaginary components of each
/// pixel adjacent, so applying a 3x3 rotation matrix to a pixel touches one
/// contiguous triple.
#[derive(Clone, Debug, PartialEq)]
pub struct QTensor {
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl QTensor {
    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        assert!(channels > 0 && height > 0 && width > 0, "dimensions must be positive");
        QTensor {
            channels,
            height,
            width,
            data: vec![0.0; channels * height * width * 3],
        }
    }

    pub fn from_data(channels: usize, height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if channels == 0 || height == 0 || width == 0 {
            return Err(Error::config("tensor dimensions must be positive"));
        }
        if data.len() != channels * height * width * 3 {
            return Err(Error::config(format!(
                "tensor data length {} does not match {}x{}x{}x3",
                data.len(),
                channels,
                height,
                width
            )));
        }
        Ok(QTensor {
            channels,
            height,
            width,
            data,
        })
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.channels, self.height, self.width)
    }

    pub fn pixel_count(&self) -> usize {
        self.channels * self.height * self.width
    }

    #[inline]
    fn idx(&self, c: usize, h: usize, w: usize) -> usize {
        debug_assert!(c < self.channels && h < self.height && w < self.width);
        ((c * self.height + h) * self.width + w) * 3
    }

    #[inline]
    pub fn pixel(&self, c: usize, h: usize, w: usize) -> PureQuaternion {
        let i = self.idx(c, h, w);
        PureQuaternion::new(self.data[i], self.data[i + 1], self.data[i + 2])
    }

    #[inline]
    pub fn set_pixel(&mut self, c: usize, h: usize, w: usize, p: PureQuaternion) {
        let i = self.idx(c, h, w);
        self.data[i] = p.x;
        self.data[i + 1] = p.y;
        self.data[i + 2] = p.z;
    }

    #[inline]
    pub fn add_pixel(&mut self, c: usize, h: usize, w: usize, p: PureQuaternion) {
        let i = self.idx(c, h, w);
        self.data[i] += p.x;
        self.data[i + 1] += p.y;
        self.data[i + 2] += p.z;
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> QTensor {
        QTensor {
            channels: self.channels,
            height: self.height,
            width: self.width,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Channels x height x width grid of plain reals.
#[derive(Clone, Debug, PartialEq)]
pub struct RTensor {
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl RTensor {
    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        assert!(channels > 0 && height > 0 && width > 0, "dimensions must be positive");
        RTensor {
            channels,
            height,
            width,
            data: vec![0.0; channels * height * width],
        }
    }

    pub fn from_data(channels: usize, height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != channels * height * width {
            return Err(Error::config(format!(
                "tensor data length {} does not match {}x{}x{}",
                data.len(),
                channels,
                height,
                width
            )));
        }
        Ok(RTensor {
            channels,
            height,
            width,
            data,
        })
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.channels, self.height, self.width)
    }

    #[inline]
    pub fn idx(&self, c: usize, h: usize, w: usize) -> usize {
        debug_assert!(c < self.channels && h < self.height && w < self.width);
        (c * self.height + h) * self.width + w
    }

    #[inline]
    pub fn get(&self, c: usize, h: usize, w: usize) -> f64 {
        self.data[self.idx(c, h, w)]
    }

    #[inline]
    pub fn set(&mut self, c: usize, h: usize, w: usize, v: f64) {
        let i = self.idx(c, h, w);
        self.data[i] = v;
    }

    #[inline]
    pub fn add(&mut self, c: usize, h: usize, w: usize, v: f64) {
        let i = self.idx(c, h, w);
        self.data[i] += v;
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }
}

/// The little shared surface gradient checking needs: tensors as flat real
/// vectors with a squared sum and scaling.
pub trait TensorOps: Clone {
    fn sq_sum(&self) -> f64;
    fn scaled(&self, k: f64) -> Self;
    fn flat(&self) -> &[f64];
    fn flat_mut(&mut self) -> &mut [f64];
}

impl TensorOps for QTensor {
    fn sq_sum(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    fn scaled(&self, k: f64) -> Self {
        self.map(|v| v * k)
    }

    fn flat(&self) -> &[f64] {
        &self.data
    }

    fn flat_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }
}

impl TensorOps for RTensor {
    fn sq_sum(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    fn scaled(&self, k: f64) -> Self {
        RTensor {
            channels: self.channels,
            height: self.height,
            width: self.width,
            data: self.data.iter().map(|&v| v * k).collect(),
        }
    }

    fn flat(&self) -> &[f64] {
        &self.data
    }

    fn flat_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }
}

/// Reinterpret a one-channel quaternion image as a 3-channel real tensor
/// (imaginary components become the channels). Linear, so the same mapping
/// carries gradients in either direction.
pub fn q_image_to_real(img: &QTensor) -> Result<RTensor> {
    if img.channels() != 1 {
        return Err(Error::config(format!(
            "expected a 1-channel quaternion image, got {} channels",
            img.channels()
        )));
    }
    let (h, w) = (img.height(), img.width());
    let mut out = RTensor::zeros(3, h, w);
    for y in 0..h {
        for x in 0..w {
            let p = img.pixel(0, y, x);
            out.set(0, y, x, p.x);
            out.set(1, y, x, p.y);
            out.set(2, y, x, p.z);
        }
    }
    Ok(out)
}

/// Inverse of [`q_image_to_real`].
pub fn real_to_q_image(rt: &RTensor) -> Result<QTensor> {
    if rt.channels() != 3 {
        return Err(Error::config(format!(
            "expected a 3-channel real tensor, got {} channels",
            rt.channels()
        )));
    }
    let (h, w) = (rt.height(), rt.width());
    let mut out = QTensor::zeros(1, h, w);
    for y in 0..h {
        for x in 0..w {
            out.set_pixel(
                0,
                y,
                x,
                PureQuaternion::new(rt.get(0, y, x), rt.get(1, y, x), rt.get(2, y, x)),
            );
        }
    }
    Ok(out)
}
