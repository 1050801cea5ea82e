//! Quaternion convolution and deconvolution (transposed convolution).
//!
//! Every kernel tap is a `(s, theta)` pair realizing the scaled rotation
//! `s * R(theta)` about the gray axis. Convolution applies `s * R` to each
//! input pixel vector under a sliding window; deconvolution is the exact
//! adjoint of that linear map (same kernel, stride, and padding), which
//! applies `s * R^T`. Parameter gradients follow the closed forms
//! `d/ds = <g, R q>` and `d/dtheta = <g, s R' q>` per tap.

use std::f64::consts::PI;

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::qalgebra::{rotation_matrix, rotation_matrix_dtheta, Mat3, RotationParams};
use crate::qlayers::DiffBlock;
use crate::tensor::QTensor;

/// Trainable weights of a quaternion (de)convolution: a `d x d` grid of
/// rotation parameters per (output, input) channel pair.
#[derive(Clone, Debug, PartialEq)]
pub struct QConvKernel {
    out_channels: usize,
    in_channels: usize,
    kernel: usize,
    stride: usize,
    padding: usize,
    taps: Vec<RotationParams>,
}

impl QConvKernel {
    /// Kernel with every tap at the identity rotation (s=1, theta=0).
    pub fn identity(
        out_channels: usize,
        in_channels: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
    ) -> Result<Self> {
        if out_channels == 0 || in_channels == 0 {
            return Err(Error::config("kernel channel counts must be positive"));
        }
        if kernel == 0 || stride == 0 {
            return Err(Error::config("kernel size and stride must be at least 1"));
        }
        let taps = vec![RotationParams::identity(); out_channels * in_channels * kernel * kernel];
        Ok(QConvKernel {
            out_channels,
            in_channels,
            kernel,
            stride,
            padding,
            taps,
        })
    }

    /// Kernel initialized near the identity: theta ~ U(-pi/8, pi/8),
    /// s ~ 1 + U(-0.05, 0.05).
    pub fn random<R: Rng>(
        out_channels: usize,
        in_channels: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let mut k = Self::identity(out_channels, in_channels, kernel, stride, padding)?;
        for tap in &mut k.taps {
            tap.s = 1.0 + rng.gen_range(-0.05..0.05);
            tap.theta = rng.gen_range(-PI / 8.0..PI / 8.0);
        }
        Ok(k)
    }

    pub fn out_channels(&self) -> usize {
        self.out_channels
    }

    pub fn in_channels(&self) -> usize {
        self.in_channels
    }

    pub fn kernel_size(&self) -> usize {
        self.kernel
    }

    pub fn stride(&self) -> usize {
        self.stride
    }

    pub fn padding(&self) -> usize {
        self.padding
    }

    pub fn taps(&self) -> &[RotationParams] {
        &self.taps
    }

    pub fn taps_mut(&mut self) -> &mut [RotationParams] {
        &mut self.taps
    }

    pub fn tap_count(&self) -> usize {
        self.taps.len()
    }

    #[inline]
    pub fn tap_index(&self, o: usize, c: usize, kh: usize, kw: usize) -> usize {
        ((o * self.in_channels + c) * self.kernel + kh) * self.kernel + kw
    }

    /// Output spatial dims of a convolution over an `h x w` input. The
    /// padded extent must be covered by whole strides.
    pub fn conv_out_dims(&self, h: usize, w: usize) -> Result<(usize, usize)> {
        let dim = |n: usize| -> Result<usize> {
            let span = (n + 2 * self.padding) as isize - self.kernel as isize;
            if span < 0 || span as usize % self.stride != 0 {
                return Err(Error::config(format!(
                    "convolution geometry does not tile: input {}, kernel {}, stride {}, padding {}",
                    n, self.kernel, self.stride, self.padding
                )));
            }
            Ok(span as usize / self.stride + 1)
        };
        Ok((dim(h)?, dim(w)?))
    }

    /// Output spatial dims of a deconvolution over an `h x w` input.
    pub fn deconv_out_dims(&self, h: usize, w: usize) -> Result<(usize, usize)> {
        let dim = |n: usize| -> Result<usize> {
            let out = ((n - 1) * self.stride + self.kernel) as isize - 2 * self.padding as isize;
            if out <= 0 {
                return Err(Error::config(format!(
                    "deconvolution output collapses: input {}, kernel {}, stride {}, padding {}",
                    n, self.kernel, self.stride, self.padding
                )));
            }
            Ok(out as usize)
        };
        Ok((dim(h)?, dim(w)?))
    }

    /// `s * R(theta)` per tap.
    pub(crate) fn scaled_rots(&self) -> Vec<Mat3> {
        self.taps.iter().map(|&t| rotation_matrix(t)).collect()
    }

    /// Unscaled `R(theta)` per tap.
    pub(crate) fn unscaled_rots(&self) -> Vec<Mat3> {
        self.taps
            .iter()
            .map(|&t| rotation_matrix(RotationParams { s: 1.0, theta: t.theta }))
            .collect()
    }

    /// `s * R'(theta)` per tap.
    pub(crate) fn scaled_drots(&self) -> Vec<Mat3> {
        self.taps.iter().map(|&t| rotation_matrix_dtheta(t)).collect()
    }
}

/// Gradients of one (de)convolution pass: input gradient plus per-tap
/// scaling and angle gradients, aligned with the kernel's tap order.
#[derive(Clone, Debug)]
pub struct KernelGrads {
    pub d_input: QTensor,
    pub d_s: Vec<f64>,
    pub d_theta: Vec<f64>,
}

fn check_conv_input(x: &QTensor, k: &QConvKernel) -> Result<()> {
    if x.channels() != k.in_channels {
        return Err(Error::config(format!(
            "convolution expects {} input channels, got {}",
            k.in_channels,
            x.channels()
        )));
    }
    Ok(())
}

fn check_deconv_input(x: &QTensor, k: &QConvKernel) -> Result<()> {
    if x.channels() != k.out_channels {
        return Err(Error::config(format!(
            "deconvolution expects {} input channels (the kernel's out_channels), got {}",
            k.out_channels,
            x.channels()
        )));
    }
    Ok(())
}

/// Quaternion convolution: sliding-window sum of `s * R` applied to pixel
/// vectors, output channel `o` summing contributions from every input channel.
pub fn qconv_forward(x: &QTensor, k: &QConvKernel) -> Result<QTensor> {
    qconv_forward_with(x, k, &k.scaled_rots())
}

pub(crate) fn qconv_forward_with(x: &QTensor, k: &QConvKernel, rots: &[Mat3]) -> Result<QTensor> {
    check_conv_input(x, k)?;
    let (oh_n, ow_n) = k.conv_out_dims(x.height(), x.width())?;
    let (h, w) = (x.height() as isize, x.width() as isize);
    let mut out = QTensor::zeros(k.out_channels, oh_n, ow_n);
    for o in 0..k.out_channels {
        for c in 0..k.in_channels {
            for kh in 0..k.kernel {
                for kw in 0..k.kernel {
                    let m = rots[k.tap_index(o, c, kh, kw)];
                    for oh in 0..oh_n {
                        let ih = (oh * k.stride + kh) as isize - k.padding as isize;
                        if ih < 0 || ih >= h {
                            continue;
                        }
                        for ow in 0..ow_n {
                            let iw = (ow * k.stride + kw) as isize - k.padding as isize;
                            if iw < 0 || iw >= w {
                                continue;
                            }
                            out.add_pixel(o, oh, ow, m.apply(x.pixel(c, ih as usize, iw as usize)));
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Backward pass of [`qconv_forward`]: `d_input` receives the transpose
/// action `s * R^T`, and each tap gets `d_s = <g, R q>`, `d_theta = <g, s R' q>`
/// summed over window positions.
pub fn qconv_backward(x: &QTensor, k: &QConvKernel, d_out: &QTensor) -> Result<KernelGrads> {
    qconv_backward_with(
        x,
        k,
        d_out,
        &k.scaled_rots(),
        &k.unscaled_rots(),
        &k.scaled_drots(),
    )
}

pub(crate) fn qconv_backward_with(
    x: &QTensor,
    k: &QConvKernel,
    d_out: &QTensor,
    srots: &[Mat3],
    rots: &[Mat3],
    drots: &[Mat3],
) -> Result<KernelGrads> {
    check_conv_input(x, k)?;
    let (oh_n, ow_n) = k.conv_out_dims(x.height(), x.width())?;
    if d_out.shape() != (k.out_channels, oh_n, ow_n) {
        return Err(Error::config(format!(
            "upstream gradient shape {:?} does not match convolution output {:?}",
            d_out.shape(),
            (k.out_channels, oh_n, ow_n)
        )));
    }
    let (h, w) = (x.height() as isize, x.width() as isize);
    let mut d_input = QTensor::zeros(x.channels(), x.height(), x.width());
    let mut d_s = vec![0.0; k.tap_count()];
    let mut d_theta = vec![0.0; k.tap_count()];
    for o in 0..k.out_channels {
        for c in 0..k.in_channels {
            for kh in 0..k.kernel {
                for kw in 0..k.kernel {
                    let t = k.tap_index(o, c, kh, kw);
                    let (sr, r, dr) = (srots[t], rots[t], drots[t]);
                    let (mut acc_s, mut acc_th) = (0.0, 0.0);
                    for oh in 0..oh_n {
                        let ih = (oh * k.stride + kh) as isize - k.padding as isize;
                        if ih < 0 || ih >= h {
                            continue;
                        }
                        for ow in 0..ow_n {
                            let iw = (ow * k.stride + kw) as isize - k.padding as isize;
                            if iw < 0 || iw >= w {
                                continue;
                            }
                            let g = d_out.pixel(o, oh, ow);
                            let a = x.pixel(c, ih as usize, iw as usize);
                            d_input.add_pixel(c, ih as usize, iw as usize, sr.apply_transposed(g));
                            acc_s += g.dot(r.apply(a));
                            acc_th += g.dot(dr.apply(a));
                        }
                    }
                    d_s[t] += acc_s;
                    d_theta[t] += acc_th;
                }
            }
        }
    }
    Ok(KernelGrads {
        d_input,
        d_s,
        d_theta,
    })
}

/// Quaternion deconvolution: the exact adjoint of [`qconv_forward`] with the
/// same kernel, stride, and padding. Consumes a tensor with the kernel's
/// `out_channels` and produces one with its `in_channels`, applying
/// `s * R^T` per tap.
pub fn qdeconv_forward(x: &QTensor, k: &QConvKernel) -> Result<QTensor> {
    qdeconv_forward_with(x, k, &k.scaled_rots())
}

pub(crate) fn qdeconv_forward_with(x: &QTensor, k: &QConvKernel, rots: &[Mat3]) -> Result<QTensor> {
    check_deconv_input(x, k)?;
    let (oh_n, ow_n) = k.deconv_out_dims(x.height(), x.width())?;
    let (oh_lim, ow_lim) = (oh_n as isize, ow_n as isize);
    let mut out = QTensor::zeros(k.in_channels, oh_n, ow_n);
    for o in 0..k.out_channels {
        for c in 0..k.in_channels {
            for kh in 0..k.kernel {
                for kw in 0..k.kernel {
                    let m = rots[k.tap_index(o, c, kh, kw)];
                    for ih in 0..x.height() {
                        let oh = (ih * k.stride + kh) as isize - k.padding as isize;
                        if oh < 0 || oh >= oh_lim {
                            continue;
                        }
                        for iw in 0..x.width() {
                            let ow = (iw * k.stride + kw) as isize - k.padding as isize;
                            if ow < 0 || ow >= ow_lim {
                                continue;
                            }
                            out.add_pixel(
                                c,
                                oh as usize,
                                ow as usize,
                                m.apply_transposed(x.pixel(o, ih, iw)),
                            );
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Backward pass of [`qdeconv_forward`]: since the forward applies `s * R^T`,
/// `d_input` receives `s * R`, `d_s = <g, R^T q>`, `d_theta = <g, s (R^T)' q>`.
pub fn qdeconv_backward(x: &QTensor, k: &QConvKernel, d_out: &QTensor) -> Result<KernelGrads> {
    qdeconv_backward_with(
        x,
        k,
        d_out,
        &k.scaled_rots(),
        &k.unscaled_rots(),
        &k.scaled_drots(),
    )
}

pub(crate) fn qdeconv_backward_with(
    x: &QTensor,
    k: &QConvKernel,
    d_out: &QTensor,
    srots: &[Mat3],
    rots: &[Mat3],
    drots: &[Mat3],
) -> Result<KernelGrads> {
    check_deconv_input(x, k)?;
    let (oh_n, ow_n) = k.deconv_out_dims(x.height(), x.width())?;
    if d_out.shape() != (k.in_channels, oh_n, ow_n) {
        return Err(Error::config(format!(
            "upstream gradient shape {:?} does not match deconvolution output {:?}",
            d_out.shape(),
            (k.in_channels, oh_n, ow_n)
        )));
    }
    let (oh_lim, ow_lim) = (oh_n as isize, ow_n as isize);
    let mut d_input = QTensor::zeros(x.channels(), x.height(), x.width());
    let mut d_s = vec![0.0; k.tap_count()];
    let mut d_theta = vec![0.0; k.tap_count()];
    for o in 0..k.out_channels {
        for c in 0..k.in_channels {
            for kh in 0..k.kernel {
                for kw in 0..k.kernel {
                    let t = k.tap_index(o, c, kh, kw);
                    let (sr, r, dr) = (srots[t], rots[t], drots[t]);
                    let (mut acc_s, mut acc_th) = (0.0, 0.0);
                    for ih in 0..x.height() {
                        let oh = (ih * k.stride + kh) as isize - k.padding as isize;
                        if oh < 0 || oh >= oh_lim {
                            continue;
                        }
                        for iw in 0..x.width() {
                            let ow = (iw * k.stride + kw) as isize - k.padding as isize;
                            if ow < 0 || ow >= ow_lim {
                                continue;
                            }
                            let g = d_out.pixel(c, oh as usize, ow as usize);
                            let a = x.pixel(o, ih, iw);
                            d_input.add_pixel(o, ih, iw, sr.apply(g));
                            acc_s += g.dot(r.apply_transposed(a));
                            acc_th += g.dot(dr.apply_transposed(a));
                        }
                    }
                    d_s[t] += acc_s;
                    d_theta[t] += acc_th;
                }
            }
        }
    }
    Ok(KernelGrads {
        d_input,
        d_s,
        d_theta,
    })
}

/// Batched quaternion convolution layer with cached inputs and accumulated
/// tap gradients.
#[derive(Clone, Debug)]
pub struct QConv {
    pub kernel: QConvKernel,
    d_s: Vec<f64>,
    d_theta: Vec<f64>,
    cache: Option<Vec<QTensor>>,
}

/// Batched quaternion deconvolution layer; the generator's upsampling
/// primitive.
#[derive(Clone, Debug)]
pub struct QDeconv {
    pub kernel: QConvKernel,
    d_s: Vec<f64>,
    d_theta: Vec<f64>,
    cache: Option<Vec<QTensor>>,
}

macro_rules! impl_kernel_layer {
    ($name:ident, $fwd:ident, $bwd:ident) => {
        impl $name {
            pub fn new(kernel: QConvKernel) -> Self {
                let n = kernel.tap_count();
                $name {
                    kernel,
                    d_s: vec![0.0; n],
                    d_theta: vec![0.0; n],
                    cache: None,
                }
            }

            pub fn forward_batch(&mut self, xs: &[QTensor]) -> Result<Vec<QTensor>> {
                let rots = self.kernel.scaled_rots();
                let out: Result<Vec<QTensor>> = xs
                    .par_iter()
                    .map(|x| $fwd(x, &self.kernel, &rots))
                    .collect();
                let out = out?;
                self.cache = Some(xs.to_vec());
                Ok(out)
            }

            /// Backward over the cached batch. Parameter gradients are
            /// skipped when `want_param_grads` is false (latent-only descent).
            pub fn backward_batch(
                &mut self,
                d_outs: &[QTensor],
                want_param_grads: bool,
            ) -> Result<Vec<QTensor>> {
                let xs = self
                    .cache
                    .as_ref()
                    .ok_or(Error::Usage("backward called before forward"))?;
                if d_outs.len() != xs.len() {
                    return Err(Error::config(format!(
                        "gradient batch size {} does not match cached batch {}",
                        d_outs.len(),
                        xs.len()
                    )));
                }
                let srots = self.kernel.scaled_rots();
                let rots = self.kernel.unscaled_rots();
                let drots = self.kernel.scaled_drots();
                let per_item: Result<Vec<KernelGrads>> = xs
                    .par_iter()
                    .zip(d_outs.par_iter())
                    .map(|(x, g)| $bwd(x, &self.kernel, g, &srots, &rots, &drots))
                    .collect();
                let per_item = per_item?;
                let mut d_inputs = Vec::with_capacity(per_item.len());
                for item in per_item {
                    if want_param_grads {
                        for (acc, v) in self.d_s.iter_mut().zip(&item.d_s) {
                            *acc += v;
                        }
                        for (acc, v) in self.d_theta.iter_mut().zip(&item.d_theta) {
                            *acc += v;
                        }
                    }
                    d_inputs.push(item.d_input);
                }
                Ok(d_inputs)
            }
        }

        impl DiffBlock for $name {
            type Tensor = QTensor;

            fn forward(&mut self, xs: &[QTensor], _train: bool) -> Result<Vec<QTensor>> {
                self.forward_batch(xs)
            }

            fn backward(&mut self, d_out: &[QTensor]) -> Result<Vec<QTensor>> {
                self.backward_batch(d_out, true)
            }

            fn param_len(&self) -> usize {
                2 * self.kernel.tap_count()
            }

            fn param(&self, i: usize) -> f64 {
                let tap = self.kernel.taps()[i / 2];
                if i % 2 == 0 {
                    tap.s
                } else {
                    tap.theta
                }
            }

            fn set_param(&mut self, i: usize, v: f64) {
                let tap = &mut self.kernel.taps_mut()[i / 2];
                if i % 2 == 0 {
                    tap.s = v;
                } else {
                    tap.theta = v;
                }
            }

            fn param_grad(&self, i: usize) -> f64 {
                if i % 2 == 0 {
                    self.d_s[i / 2]
                } else {
                    self.d_theta[i / 2]
                }
            }

            fn zero_grads(&mut self) {
                self.d_s.iter_mut().for_each(|v| *v = 0.0);
                self.d_theta.iter_mut().for_each(|v| *v = 0.0);
            }
        }
    };
}

impl_kernel_layer!(QConv, qconv_forward_with, qconv_backward_with);
impl_kernel_layer!(QDeconv, qdeconv_forward_with, qdeconv_backward_with);

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qalgebra::{sandwich, PureQuaternion};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_tensor(rng: &mut ChaCha8Rng, c: usize, h: usize, w: usize) -> QTensor {
        let data: Vec<f64> = (0..c * h * w * 3).map(|_| rng.gen_range(-1.0..1.0)).collect();
        QTensor::from_data(c, h, w, data).unwrap()
    }

    fn inner(a: &QTensor, b: &QTensor) -> f64 {
        a.data().iter().zip(b.data()).map(|(x, y)| x * y).sum()
    }

    #[test]
    fn gray_pixel_is_fixed_by_any_single_tap() {
        let mut x = QTensor::zeros(1, 1, 1);
        x.set_pixel(0, 0, 0, PureQuaternion::new(0.4, 0.4, 0.4));
        for &theta in &[0.0, 0.7, -2.1] {
            let mut k = QConvKernel::identity(1, 1, 1, 1, 0).unwrap();
            k.taps_mut()[0] = RotationParams::new(1.0, theta);
            let y = qconv_forward(&x, &k).unwrap();
            assert!((y.pixel(0, 0, 0) - x.pixel(0, 0, 0)).norm() < 1e-14);
        }
    }

    #[test]
    fn conv_matches_sandwich_sum_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let x = random_tensor(&mut rng, 1, 5, 5);
            let mut k = QConvKernel::identity(1, 1, 3, 1, 0).unwrap();
            for tap in k.taps_mut() {
                tap.s = rng.gen_range(0.3..1.8);
                tap.theta = rng.gen_range(-3.0..3.0);
            }
            let out = qconv_forward(&x, &k).unwrap();
            assert_eq!(out.shape(), (1, 3, 3));
            for oh in 0..3 {
                for ow in 0..3 {
                    let mut want = PureQuaternion::ZERO;
                    for kh in 0..3 {
                        for kw in 0..3 {
                            let tap = k.taps()[k.tap_index(0, 0, kh, kw)];
                            want += sandwich(tap, x.pixel(0, oh + kh, ow + kw)).unwrap();
                        }
                    }
                    let got = out.pixel(0, oh, ow);
                    assert!(
                        (got - want).norm() < 1e-12,
                        "pixel ({oh},{ow}): {got:?} vs {want:?}"
                    );
                }
            }
        }
    }

    #[test]
    fn zero_scale_kernel_gives_zero_output() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let x = random_tensor(&mut rng, 2, 4, 4);
        let mut k = QConvKernel::identity(3, 2, 3, 1, 1).unwrap();
        for tap in k.taps_mut() {
            tap.s = 0.0;
            tap.theta = rng.gen_range(-3.0..3.0);
        }
        let out = qconv_forward(&x, &k).unwrap();
        assert!(out.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn identity_tap_backward_passes_gradient_through() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let x = random_tensor(&mut rng, 1, 3, 3);
        let k = QConvKernel::identity(1, 1, 1, 1, 0).unwrap();
        let d_out = random_tensor(&mut rng, 1, 3, 3);
        let g = qconv_backward(&x, &k, &d_out).unwrap();
        assert_eq!(g.d_input, d_out);

        let g = qdeconv_backward(&x, &k, &d_out).unwrap();
        assert_eq!(g.d_input, d_out);
    }

    #[test]
    fn zero_upstream_gradient_gives_zero_grads() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let x = random_tensor(&mut rng, 2, 4, 4);
        let k = QConvKernel::random(2, 2, 3, 1, 0, &mut rng).unwrap();
        let d_out = QTensor::zeros(2, 2, 2);
        let g = qconv_backward(&x, &k, &d_out).unwrap();
        assert!(g.d_input.data().iter().all(|&v| v == 0.0));
        assert!(g.d_s.iter().all(|&v| v == 0.0));
        assert!(g.d_theta.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn deconv_identity_and_upsampling_shape() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let x = random_tensor(&mut rng, 1, 3, 3);
        let k = QConvKernel::identity(1, 1, 1, 1, 0).unwrap();
        assert_eq!(qdeconv_forward(&x, &k).unwrap(), x);

        // DCGAN-style doubling: stride 2, 4x4 kernel, padding 1.
        let x = random_tensor(&mut rng, 2, 4, 4);
        let k = QConvKernel::random(2, 3, 4, 2, 1, &mut rng).unwrap();
        let y = qdeconv_forward(&x, &k).unwrap();
        assert_eq!(y.shape(), (3, 8, 8));
    }

    #[test]
    fn deconv_is_exact_adjoint_of_conv() {
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        for _ in 0..50 {
            let stride = rng.gen_range(1..=2usize);
            let padding = rng.gen_range(0..=1usize);
            let kernel = rng.gen_range(3..=4usize);
            let in_c = rng.gen_range(1..=2usize);
            let out_c = rng.gen_range(1..=2usize);
            // Pick an input size the geometry tiles.
            let hw = kernel + stride * rng.gen_range(1..=3usize) - 2 * padding;
            let k = QConvKernel::random(out_c, in_c, kernel, stride, padding, &mut rng).unwrap();
            let x = random_tensor(&mut rng, in_c, hw, hw);
            let cx = qconv_forward(&x, &k).unwrap();
            let y = random_tensor(&mut rng, cx.channels(), cx.height(), cx.width());
            let dy = qdeconv_forward(&y, &k).unwrap();
            assert_eq!(dy.shape(), x.shape());
            let lhs = inner(&cx, &y);
            let rhs = inner(&x, &dy);
            assert!(
                (lhs - rhs).abs() < 1e-10 * lhs.abs().max(1.0),
                "adjointness violated: {lhs} vs {rhs} (k={kernel} s={stride} p={padding})"
            );
        }
    }

    #[test]
    fn s_gradient_vanishes_when_upstream_is_orthogonal() {
        // Single 1x1 tap: d_s = <g, R^T q> for deconv; pick g orthogonal to it.
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mut k = QConvKernel::identity(1, 1, 1, 1, 0).unwrap();
        k.taps_mut()[0] = RotationParams::new(1.3, 0.9);
        let mut x = QTensor::zeros(1, 1, 1);
        let q = PureQuaternion::new(
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        );
        x.set_pixel(0, 0, 0, q);
        let rtq = rotation_matrix(RotationParams { s: 1.0, theta: 0.9 }).apply_transposed(q);
        // Any vector orthogonal to rtq.
        let g = PureQuaternion::new(-rtq.y, rtq.x, 0.0);
        let mut d_out = QTensor::zeros(1, 1, 1);
        d_out.set_pixel(0, 0, 0, g);
        let grads = qdeconv_backward(&x, &k, &d_out).unwrap();
        assert!(grads.d_s[0].abs() < 1e-14);
    }

    #[test]
    fn shape_mismatches_are_configuration_errors() {
        let mut rng = ChaCha8Rng::seed_from_u64(18);
        let x = random_tensor(&mut rng, 2, 5, 5);
        let k = QConvKernel::identity(1, 3, 3, 1, 0).unwrap();
        assert!(matches!(qconv_forward(&x, &k), Err(Error::Config(_))));

        // Geometry that does not tile: (5 - 4) % 2 != 0.
        let k = QConvKernel::identity(1, 2, 4, 2, 0).unwrap();
        assert!(matches!(qconv_forward(&x, &k), Err(Error::Config(_))));

        let k = QConvKernel::identity(2, 2, 3, 1, 0).unwrap();
        let d_bad = QTensor::zeros(2, 4, 4);
        assert!(matches!(
            qconv_backward(&x, &k, &d_bad),
            Err(Error::Config(_))
        ));
    }
}
