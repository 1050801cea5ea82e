//! Quaternion batch normalization.
//!
//! Each channel is centered by a pure-quaternion mean and scaled by one
//! shared real standard deviation `sqrt(var + eps)`, where the variance is
//! the mean squared quaternion norm of the deviations, pooled over
//! batch x height x width. The affine stage multiplies by a real `gamma`
//! and shifts by a quaternion `beta`. Inference folds frozen running
//! statistics into a single affine map, with the unbiased `n/(n-1)`
//! correction applied to the running variance at that point.

use crate::error::{Error, Result};
use crate::qalgebra::PureQuaternion;
use crate::qlayers::DiffBlock;
use crate::tensor::QTensor;

#[derive(Clone, Debug)]
struct BnCache {
    train: bool,
    inputs: Vec<QTensor>,
    mean: Vec<PureQuaternion>,
    var: Vec<f64>,
    /// Per-channel `gamma / sqrt(var + eps)` of the infer pass.
    infer_scale: Vec<f64>,
}

/// Per-channel quaternion batch normalization state.
#[derive(Clone, Debug)]
pub struct QBatchNorm {
    dims: usize,
    gamma: Vec<f64>,
    beta: Vec<PureQuaternion>,
    running_mean: Vec<PureQuaternion>,
    running_var: Vec<f64>,
    epsilon: f64,
    momentum: f64,
    trained: bool,
    /// Pooled sample count (batch x height x width) of the last training
    /// batch; feeds the unbiased variance correction.
    sample_count: usize,
    d_gamma: Vec<f64>,
    d_beta: Vec<PureQuaternion>,
    cache: Option<BnCache>,
}

impl QBatchNorm {
    pub fn new(dims: usize, epsilon: f64, momentum: f64) -> Result<Self> {
        if dims == 0 {
            return Err(Error::config("batch norm needs at least one dimension"));
        }
        if epsilon <= 0.0 {
            return Err(Error::config("batch norm epsilon must be positive"));
        }
        if !(momentum > 0.0 && momentum <= 1.0) {
            return Err(Error::config("batch norm momentum must lie in (0, 1]"));
        }
        Ok(QBatchNorm {
            dims,
            gamma: vec![1.0; dims],
            beta: vec![PureQuaternion::ZERO; dims],
            running_mean: vec![PureQuaternion::ZERO; dims],
            running_var: vec![1.0; dims],
            epsilon,
            momentum,
            trained: false,
            sample_count: 0,
            d_gamma: vec![0.0; dims],
            d_beta: vec![PureQuaternion::ZERO; dims],
            cache: None,
        })
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn momentum(&self) -> f64 {
        self.momentum
    }

    pub fn gamma(&self) -> &[f64] {
        &self.gamma
    }

    pub fn beta(&self) -> &[PureQuaternion] {
        &self.beta
    }

    pub fn running_mean(&self) -> &[PureQuaternion] {
        &self.running_mean
    }

    pub fn running_var(&self) -> &[f64] {
        &self.running_var
    }

    pub fn is_trained(&self) -> bool {
        self.trained
    }

    pub fn sample_count(&self) -> usize {
        self.sample_count
    }

    pub fn set_gamma_beta(&mut self, gamma: Vec<f64>, beta: Vec<PureQuaternion>) -> Result<()> {
        if gamma.len() != self.dims || beta.len() != self.dims {
            return Err(Error::config("gamma/beta length does not match dims"));
        }
        self.gamma = gamma;
        self.beta = beta;
        Ok(())
    }

    /// Overwrite the frozen statistics, marking the layer as trained.
    /// `sample_count` is the pooled count the variance was estimated from.
    pub fn set_running_stats(
        &mut self,
        mean: Vec<PureQuaternion>,
        var: Vec<f64>,
        sample_count: usize,
    ) -> Result<()> {
        if mean.len() != self.dims || var.len() != self.dims {
            return Err(Error::config("running stats length does not match dims"));
        }
        if var.iter().any(|&v| v < 0.0) {
            return Err(Error::config("running variance must be non-negative"));
        }
        if sample_count < 2 {
            return Err(Error::config("sample count must be at least 2"));
        }
        self.running_mean = mean;
        self.running_var = var;
        self.sample_count = sample_count;
        self.trained = true;
        Ok(())
    }

    /// Full state restore for checkpoint loading.
    pub(crate) fn restore(
        &mut self,
        gamma: Vec<f64>,
        beta: Vec<PureQuaternion>,
        running_mean: Vec<PureQuaternion>,
        running_var: Vec<f64>,
        trained: bool,
        sample_count: usize,
    ) -> Result<()> {
        if gamma.len() != self.dims
            || beta.len() != self.dims
            || running_mean.len() != self.dims
            || running_var.len() != self.dims
        {
            return Err(Error::config("batch norm state length does not match dims"));
        }
        self.gamma = gamma;
        self.beta = beta;
        self.running_mean = running_mean;
        self.running_var = running_var;
        self.trained = trained;
        self.sample_count = sample_count;
        Ok(())
    }

    fn check_batch(&self, xs: &[QTensor]) -> Result<(usize, usize)> {
        let first = xs
            .first()
            .ok_or_else(|| Error::domain("batch normalization over an empty batch"))?;
        if first.channels() != self.dims {
            return Err(Error::config(format!(
                "batch norm configured for {} channels, input has {}",
                self.dims,
                first.channels()
            )));
        }
        for x in xs {
            if x.shape() != first.shape() {
                return Err(Error::config("batch items must share a shape"));
            }
        }
        Ok((first.height(), first.width()))
    }

    fn batch_stats(&self, xs: &[QTensor]) -> (Vec<PureQuaternion>, Vec<f64>, usize) {
        let (h, w) = (xs[0].height(), xs[0].width());
        let n = xs.len() * h * w;
        let inv_n = 1.0 / n as f64;
        let mut mean = vec![PureQuaternion::ZERO; self.dims];
        for x in xs {
            for c in 0..self.dims {
                for y in 0..h {
                    for xx in 0..w {
                        mean[c] += x.pixel(c, y, xx);
                    }
                }
            }
        }
        for m in &mut mean {
            *m = m.scaled(inv_n);
        }
        let mut var = vec![0.0; self.dims];
        for x in xs {
            for c in 0..self.dims {
                for y in 0..h {
                    for xx in 0..w {
                        var[c] += (x.pixel(c, y, xx) - mean[c]).norm_sq();
                    }
                }
            }
        }
        for v in &mut var {
            *v *= inv_n;
        }
        (mean, var, n)
    }

    /// Training-mode forward: normalize with the batch's own statistics,
    /// apply the affine stage, and fold the batch statistics into the
    /// running averages. Requires at least two batch items.
    pub fn forward_train(&mut self, xs: &[QTensor]) -> Result<Vec<QTensor>> {
        if xs.len() < 2 {
            return Err(Error::domain(format!(
                "training-mode batch normalization needs a batch of at least 2, got {}",
                xs.len()
            )));
        }
        let (h, w) = self.check_batch(xs)?;
        let (mean, var, n) = self.batch_stats(xs);

        let inv_std: Vec<f64> = var.iter().map(|&v| 1.0 / (v + self.epsilon).sqrt()).collect();
        let mut out = Vec::with_capacity(xs.len());
        for x in xs {
            let mut y = QTensor::zeros(self.dims, h, w);
            for c in 0..self.dims {
                for yy in 0..h {
                    for xx in 0..w {
                        let normalized = (x.pixel(c, yy, xx) - mean[c]).scaled(inv_std[c]);
                        y.set_pixel(c, yy, xx, normalized.scaled(self.gamma[c]) + self.beta[c]);
                    }
                }
            }
            out.push(y);
        }

        for c in 0..self.dims {
            self.running_mean[c] =
                self.running_mean[c].scaled(1.0 - self.momentum) + mean[c].scaled(self.momentum);
            self.running_var[c] =
                (1.0 - self.momentum) * self.running_var[c] + self.momentum * var[c];
        }
        self.sample_count = n;
        self.trained = true;

        self.cache = Some(BnCache {
            train: true,
            inputs: xs.to_vec(),
            mean,
            var,
            infer_scale: Vec::new(),
        });
        Ok(out)
    }

    /// Per-channel `n/(n-1)`-corrected frozen variance.
    pub fn unbiased_running_var(&self) -> Result<Vec<f64>> {
        if !self.trained {
            return Err(Error::domain(
                "batch normalization inference requires at least one training pass",
            ));
        }
        let n = self.sample_count as f64;
        Ok(self.running_var.iter().map(|&v| v * n / (n - 1.0)).collect())
    }

    /// Inference-mode forward using frozen statistics, in the folded affine
    /// form `y = gamma/sqrt(Var + eps) * x + (beta - gamma*E[x]/sqrt(Var + eps))`.
    pub fn forward_infer(&mut self, xs: &[QTensor]) -> Result<Vec<QTensor>> {
        let (h, w) = self.check_batch(xs)?;
        let var = self.unbiased_running_var()?;
        let scale: Vec<f64> = var
            .iter()
            .zip(&self.gamma)
            .map(|(&v, &g)| g / (v + self.epsilon).sqrt())
            .collect();
        let shift: Vec<PureQuaternion> = (0..self.dims)
            .map(|c| self.beta[c] - self.running_mean[c].scaled(scale[c]))
            .collect();

        let mut out = Vec::with_capacity(xs.len());
        for x in xs {
            let mut y = QTensor::zeros(self.dims, h, w);
            for c in 0..self.dims {
                for yy in 0..h {
                    for xx in 0..w {
                        y.set_pixel(c, yy, xx, x.pixel(c, yy, xx).scaled(scale[c]) + shift[c]);
                    }
                }
            }
            out.push(y);
        }
        self.cache = Some(BnCache {
            train: false,
            inputs: Vec::new(),
            mean: Vec::new(),
            var: Vec::new(),
            infer_scale: scale,
        });
        Ok(out)
    }

    /// Backward through the most recent forward pass. In training mode the
    /// three imaginary components couple through the shared scalar variance;
    /// in inference mode the layer is a fixed affine map.
    pub fn backward_batch(&mut self, d_outs: &[QTensor]) -> Result<Vec<QTensor>> {
        let cache = self
            .cache
            .as_ref()
            .ok_or(Error::Usage("batch norm backward called before forward"))?;
        if !cache.train {
            let scale = cache.infer_scale.clone();
            let mut d_inputs = Vec::with_capacity(d_outs.len());
            for g in d_outs {
                let mut d = QTensor::zeros(g.channels(), g.height(), g.width());
                for c in 0..self.dims {
                    for yy in 0..g.height() {
                        for xx in 0..g.width() {
                            d.set_pixel(c, yy, xx, g.pixel(c, yy, xx).scaled(scale[c]));
                        }
                    }
                }
                d_inputs.push(d);
            }
            return Ok(d_inputs);
        }

        let inputs = &cache.inputs;
        if d_outs.len() != inputs.len() {
            return Err(Error::config(format!(
                "gradient batch size {} does not match cached batch {}",
                d_outs.len(),
                inputs.len()
            )));
        }
        let (h, w) = (inputs[0].height(), inputs[0].width());
        let n = (inputs.len() * h * w) as f64;

        let mut d_inputs = vec![QTensor::zeros(self.dims, h, w); inputs.len()];
        for c in 0..self.dims {
            let mu = cache.mean[c];
            let v = cache.var[c] + self.epsilon;
            let inv_std = 1.0 / v.sqrt();

            // First sweep: reductions shared by every element of the channel.
            let mut sum_dxhat = PureQuaternion::ZERO;
            let mut dot_dxhat_centered = 0.0;
            let mut sum_centered = PureQuaternion::ZERO;
            for (x, g) in inputs.iter().zip(d_outs) {
                for yy in 0..h {
                    for xx in 0..w {
                        let centered = x.pixel(c, yy, xx) - mu;
                        let gp = g.pixel(c, yy, xx);
                        let d_xhat = gp.scaled(self.gamma[c]);
                        sum_dxhat += d_xhat;
                        dot_dxhat_centered += d_xhat.dot(centered);
                        sum_centered += centered;
                        self.d_gamma[c] += gp.dot(centered.scaled(inv_std));
                        self.d_beta[c] += gp;
                    }
                }
            }
            let d_var = dot_dxhat_centered * (-0.5) * inv_std / v;
            let d_mean = sum_dxhat.scaled(-inv_std) + sum_centered.scaled(-2.0 / n * d_var);

            // Second sweep: per-element input gradients.
            for ((x, g), d) in inputs.iter().zip(d_outs).zip(&mut d_inputs) {
                for yy in 0..h {
                    for xx in 0..w {
                        let centered = x.pixel(c, yy, xx) - mu;
                        let d_xhat = g.pixel(c, yy, xx).scaled(self.gamma[c]);
                        let dx = d_xhat.scaled(inv_std)
                            + centered.scaled(2.0 / n * d_var)
                            + d_mean.scaled(1.0 / n);
                        d.set_pixel(c, yy, xx, dx);
                    }
                }
            }
        }
        Ok(d_inputs)
    }
}

impl DiffBlock for QBatchNorm {
    type Tensor = QTensor;

    fn forward(&mut self, xs: &[QTensor], train: bool) -> Result<Vec<QTensor>> {
        if train {
            self.forward_train(xs)
        } else {
            self.forward_infer(xs)
        }
    }

    fn backward(&mut self, d_out: &[QTensor]) -> Result<Vec<QTensor>> {
        self.backward_batch(d_out)
    }

    fn param_len(&self) -> usize {
        4 * self.dims
    }

    fn param(&self, i: usize) -> f64 {
        if i < self.dims {
            self.gamma[i]
        } else {
            let j = i - self.dims;
            let b = self.beta[j / 3];
            match j % 3 {
                0 => b.x,
                1 => b.y,
                _ => b.z,
            }
        }
    }

    fn set_param(&mut self, i: usize, v: f64) {
        if i < self.dims {
            self.gamma[i] = v;
        } else {
            let j = i - self.dims;
            let b = &mut self.beta[j / 3];
            match j % 3 {
                0 => b.x = v,
                1 => b.y = v,
                _ => b.z = v,
            }
        }
    }

    fn param_grad(&self, i: usize) -> f64 {
        if i < self.dims {
            self.d_gamma[i]
        } else {
            let j = i - self.dims;
            let b = self.d_beta[j / 3];
            match j % 3 {
                0 => b.x,
                1 => b.y,
                _ => b.z,
            }
        }
    }

    fn zero_grads(&mut self) {
        self.d_gamma.iter_mut().for_each(|v| *v = 0.0);
        self.d_beta.iter_mut().for_each(|v| *v = PureQuaternion::ZERO);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn single(p: PureQuaternion) -> QTensor {
        let mut t = QTensor::zeros(1, 1, 1);
        t.set_pixel(0, 0, 0, p);
        t
    }

    #[test]
    fn two_point_batch_normalizes_to_unit_spread() {
        // Batch {i, 3i} with gamma=1, beta=0 and a tiny epsilon: mean 2i,
        // variance 1, so the batch maps to {-i, +i} (up to the eps floor).
        let mut bn = QBatchNorm::new(1, 1e-12, 0.1).unwrap();
        let xs = vec![
            single(PureQuaternion::new(1.0, 0.0, 0.0)),
            single(PureQuaternion::new(3.0, 0.0, 0.0)),
        ];
        let ys = bn.forward_train(&xs).unwrap();
        assert!((ys[0].pixel(0, 0, 0).x + 1.0).abs() < 1e-9);
        assert!((ys[1].pixel(0, 0, 0).x - 1.0).abs() < 1e-9);
        assert!(ys[0].pixel(0, 0, 0).y.abs() < 1e-12);
    }

    #[test]
    fn constant_batch_collapses_to_beta() {
        let mut bn = QBatchNorm::new(2, 1e-5, 0.1).unwrap();
        let beta = vec![
            PureQuaternion::new(0.3, -0.1, 0.9),
            PureQuaternion::new(-0.5, 0.0, 0.2),
        ];
        bn.set_gamma_beta(vec![2.0, 0.7], beta.clone()).unwrap();
        let x = QTensor::from_data(2, 2, 2, vec![0.4; 2 * 2 * 2 * 3]).unwrap();
        let ys = bn.forward_train(&[x.clone(), x.clone(), x]).unwrap();
        for y in &ys {
            for c in 0..2 {
                for h in 0..2 {
                    for w in 0..2 {
                        assert!((y.pixel(c, h, w) - beta[c]).norm() < 1e-9);
                    }
                }
            }
        }
    }

    #[test]
    fn train_output_statistics_match_shrunk_variance() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let eps = 1e-3;
        let mut bn = QBatchNorm::new(2, eps, 0.1).unwrap();
        let xs: Vec<QTensor> = (0..6)
            .map(|_| {
                let data: Vec<f64> = (0..2 * 3 * 3 * 3).map(|_| rng.gen_range(-2.0..2.0)).collect();
                QTensor::from_data(2, 3, 3, data).unwrap()
            })
            .collect();
        let (_, var_in, _) = bn.batch_stats(&xs);
        let ys = bn.forward_train(&xs).unwrap();
        let (mean_out, var_out, _) = bn.batch_stats(&ys);
        for c in 0..2 {
            assert!(mean_out[c].norm() < 1e-6, "mean norm {}", mean_out[c].norm());
            let want = var_in[c] / (var_in[c] + eps);
            assert!(
                (var_out[c] - want).abs() < 1e-4,
                "variance {} vs {}",
                var_out[c],
                want
            );
        }
    }

    #[test]
    fn small_batches_are_rejected() {
        let mut bn = QBatchNorm::new(1, 1e-5, 0.1).unwrap();
        let x = single(PureQuaternion::new(1.0, 2.0, 3.0));
        assert!(matches!(bn.forward_train(&[x]), Err(Error::Domain(_))));
    }

    #[test]
    fn infer_before_training_is_rejected() {
        let mut bn = QBatchNorm::new(1, 1e-5, 0.1).unwrap();
        let x = single(PureQuaternion::new(1.0, 2.0, 3.0));
        assert!(matches!(bn.forward_infer(&[x]), Err(Error::Domain(_))));
    }

    #[test]
    fn infer_folded_form_matches_direct_normalization() {
        // Freeze statistics equal to a batch's own; the folded affine form
        // must reproduce the direct (x - E)/sqrt(Var + eps) * gamma + beta
        // computation with the same unbiased variance.
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let mut bn = QBatchNorm::new(1, 1e-5, 0.1).unwrap();
        bn.set_gamma_beta(vec![1.3], vec![PureQuaternion::new(0.2, -0.4, 0.1)])
            .unwrap();
        let xs: Vec<QTensor> = (0..4)
            .map(|_| {
                single(PureQuaternion::new(
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                ))
            })
            .collect();
        let (mean, var, n) = bn.batch_stats(&xs);
        bn.set_running_stats(mean.clone(), var.clone(), n).unwrap();
        let ys = bn.forward_infer(&xs).unwrap();

        let corrected = var[0] * n as f64 / (n as f64 - 1.0);
        let inv = 1.0 / (corrected + bn.epsilon()).sqrt();
        for (x, y) in xs.iter().zip(&ys) {
            let want = (x.pixel(0, 0, 0) - mean[0]).scaled(1.3 * inv)
                + PureQuaternion::new(0.2, -0.4, 0.1);
            assert!((y.pixel(0, 0, 0) - want).norm() < 1e-12);
        }
    }

    #[test]
    fn infer_identity_and_constant_cases() {
        let mut bn = QBatchNorm::new(1, 1e-5, 0.1).unwrap();
        // E[x] = 0 and unbiased Var + eps = 1 makes inference the identity.
        let n = 10.0_f64;
        let var = (1.0 - bn.epsilon()) * (n - 1.0) / n;
        bn.set_running_stats(vec![PureQuaternion::ZERO], vec![var], 10)
            .unwrap();
        let x = single(PureQuaternion::new(0.3, -0.7, 0.5));
        let y = bn.forward_infer(&[x.clone()]).unwrap();
        assert!((y[0].pixel(0, 0, 0) - x.pixel(0, 0, 0)).norm() < 1e-12);

        // x equal to the frozen mean collapses to beta.
        let mean = PureQuaternion::new(0.4, 0.1, -0.2);
        let beta = PureQuaternion::new(-0.3, 0.8, 0.0);
        bn.set_gamma_beta(vec![2.0], vec![beta]).unwrap();
        bn.set_running_stats(vec![mean], vec![0.5], 10).unwrap();
        let y = bn.forward_infer(&[single(mean)]).unwrap();
        assert!((y[0].pixel(0, 0, 0) - beta).norm() < 1e-12);
    }

    #[test]
    fn zero_upstream_gradient_and_beta_gradient_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let mut bn = QBatchNorm::new(1, 1e-5, 0.1).unwrap();
        let xs: Vec<QTensor> = (0..4)
            .map(|_| {
                single(PureQuaternion::new(
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                ))
            })
            .collect();
        bn.forward_train(&xs).unwrap();

        let zeros = vec![single(PureQuaternion::ZERO); 4];
        let d_in = bn.backward_batch(&zeros).unwrap();
        assert!(d_in.iter().all(|d| d.data().iter().all(|&v| v == 0.0)));
        assert!(bn.d_gamma[0] == 0.0 && bn.d_beta[0].norm() == 0.0);

        bn.zero_grads();
        bn.forward_train(&xs).unwrap();
        let gs: Vec<QTensor> = (0..4)
            .map(|_| {
                single(PureQuaternion::new(
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                ))
            })
            .collect();
        let sum: PureQuaternion = gs
            .iter()
            .map(|g| g.pixel(0, 0, 0))
            .fold(PureQuaternion::ZERO, |a, b| a + b);
        bn.backward_batch(&gs).unwrap();
        assert!((bn.d_beta[0] - sum).norm() < 1e-12);
    }

    #[test]
    fn backward_without_forward_is_a_usage_error() {
        let mut bn = QBatchNorm::new(1, 1e-5, 0.1).unwrap();
        let g = single(PureQuaternion::new(1.0, 0.0, 0.0));
        assert!(matches!(bn.backward_batch(&[g]), Err(Error::Usage(_))));
    }
}
