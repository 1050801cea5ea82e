//! Shared fixture builders for the criterion benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use qgan_core::qlayers::QConvKernel;
use qgan_core::tensor::QTensor;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_qtensor(rng: &mut ChaCha8Rng, c: usize, h: usize, w: usize) -> QTensor {
    let data: Vec<f64> = (0..c * h * w * 3).map(|_| rng.gen_range(-1.0..1.0)).collect();
    QTensor::from_data(c, h, w, data).expect("valid shape")
}

pub fn random_kernel(
    rng: &mut ChaCha8Rng,
    out_c: usize,
    in_c: usize,
    k: usize,
    stride: usize,
    padding: usize,
) -> QConvKernel {
    QConvKernel::random(out_c, in_c, k, stride, padding, rng).expect("valid kernel")
}
