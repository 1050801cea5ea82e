//! Split activations: the real nonlinearity applied independently to each
//! of the three imaginary components of every pixel.

use crate::error::{Error, Result};
use crate::qlayers::DiffBlock;
use crate::tensor::QTensor;

/// Supported split activation kinds.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ActKind {
    LeakyRelu(f64),
    Tanh,
}

impl ActKind {
    #[inline]
    fn eval(self, v: f64) -> f64 {
        match self {
            ActKind::LeakyRelu(alpha) => {
                if v >= 0.0 {
                    v
                } else {
                    alpha * v
                }
            }
            ActKind::Tanh => v.tanh(),
        }
    }

    #[inline]
    fn derivative(self, v: f64) -> f64 {
        match self {
            ActKind::LeakyRelu(alpha) => {
                if v >= 0.0 {
                    1.0
                } else {
                    alpha
                }
            }
            ActKind::Tanh => {
                let t = v.tanh();
                1.0 - t * t
            }
        }
    }
}

/// Componentwise application of a split activation.
pub fn activation_forward(x: &QTensor, kind: ActKind) -> QTensor {
    x.map(|v| kind.eval(v))
}

/// Componentwise derivative times the upstream gradient.
pub fn activation_backward(x: &QTensor, kind: ActKind, d_out: &QTensor) -> Result<QTensor> {
    if x.shape() != d_out.shape() {
        return Err(Error::config("activation gradient shape mismatch"));
    }
    let mut d = d_out.clone();
    for (dv, &xv) in d.data_mut().iter_mut().zip(x.data()) {
        *dv *= kind.derivative(xv);
    }
    Ok(d)
}

/// Stateless-parameter activation layer with a cached input batch.
#[derive(Clone, Debug)]
pub struct SplitActivation {
    pub kind: ActKind,
    cache: Option<Vec<QTensor>>,
}

impl SplitActivation {
    pub fn new(kind: ActKind) -> Self {
        SplitActivation { kind, cache: None }
    }
}

impl DiffBlock for SplitActivation {
    type Tensor = QTensor;

    fn forward(&mut self, xs: &[QTensor], _train: bool) -> Result<Vec<QTensor>> {
        let out = xs.iter().map(|x| activation_forward(x, self.kind)).collect();
        self.cache = Some(xs.to_vec());
        Ok(out)
    }

    fn backward(&mut self, d_out: &[QTensor]) -> Result<Vec<QTensor>> {
        let xs = self
            .cache
            .as_ref()
            .ok_or(Error::Usage("activation backward called before forward"))?;
        if d_out.len() != xs.len() {
            return Err(Error::config("activation gradient batch size mismatch"));
        }
        xs.iter()
            .zip(d_out)
            .map(|(x, g)| activation_backward(x, self.kind, g))
            .collect()
    }

    fn param_len(&self) -> usize {
        0
    }

    fn param(&self, _i: usize) -> f64 {
        unreachable!("activation has no parameters")
    }

    fn set_param(&mut self, _i: usize, _v: f64) {
        unreachable!("activation has no parameters")
    }

    fn param_grad(&self, _i: usize) -> f64 {
        unreachable!("activation has no parameters")
    }

    fn zero_grads(&mut self) {}
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qalgebra::PureQuaternion;

    #[test]
    fn leaky_relu_componentwise() {
        let mut x = QTensor::zeros(1, 1, 1);
        x.set_pixel(0, 0, 0, PureQuaternion::new(1.0, -1.0, 2.0));
        let y = activation_forward(&x, ActKind::LeakyRelu(0.2));
        assert_eq!(y.pixel(0, 0, 0), PureQuaternion::new(1.0, -0.2, 2.0));
    }

    #[test]
    fn tanh_zero_fixpoint() {
        let x = QTensor::zeros(2, 3, 3);
        let y = activation_forward(&x, ActKind::Tanh);
        assert!(y.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn backward_scales_by_derivative() {
        let mut x = QTensor::zeros(1, 1, 1);
        x.set_pixel(0, 0, 0, PureQuaternion::new(0.5, -0.5, 0.0));
        let mut g = QTensor::zeros(1, 1, 1);
        g.set_pixel(0, 0, 0, PureQuaternion::new(1.0, 1.0, 1.0));
        let d = activation_backward(&x, ActKind::LeakyRelu(0.2), &g).unwrap();
        assert_eq!(d.pixel(0, 0, 0), PureQuaternion::new(1.0, 0.2, 1.0));
    }
}
