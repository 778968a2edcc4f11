use rand::Rng;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

use super::{expect_shape, glorot_bound};

/// Per-timestep affine output map, `weight` is `[classes, features]`.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseParams<F = f64> {
    pub weight: Tensor<F>,
    pub bias: Tensor<F>,
}

impl<F: Scalar> DenseParams<F> {
    pub fn init<R: Rng + ?Sized>(features: usize, classes: usize, rng: &mut R) -> Result<Self> {
        Ok(DenseParams {
            weight: Tensor::uniform(&[classes, features], glorot_bound(features, classes), rng)?,
            bias: Tensor::zeros(&[classes])?,
        })
    }

    pub fn zeros_like(&self) -> Self {
        DenseParams {
            weight: self.weight.zeros_like(),
            bias: self.bias.zeros_like(),
        }
    }

    pub fn classes(&self) -> usize {
        self.weight.shape()[0]
    }

    pub fn features(&self) -> usize {
        self.weight.shape()[1]
    }
}

pub struct DenseCache<F> {
    input: Tensor<F>,
}

pub fn dense<F: Scalar>(p: &DenseParams<F>, seq: Tensor<F>) -> Result<(Tensor<F>, DenseCache<F>)> {
    match *seq.shape() {
        [_, f] if f == p.features() => {}
        _ => {
            return Err(Error::shape(format!(
                "dense expects [T,{}], got {:?}",
                p.features(),
                seq.shape()
            )))
        }
    }
    let mut y = seq.matmul_bt(&p.weight)?;
    for t in 0..y.shape()[0] {
        for (v, &b) in y.row_mut(t).iter_mut().zip(p.bias.data()) {
            *v += b;
        }
    }
    Ok((y, DenseCache { input: seq }))
}

pub fn dense_backward<F: Scalar>(
    p: &DenseParams<F>,
    cache: &DenseCache<F>,
    upstream: &Tensor<F>,
    need_input_grad: bool,
) -> Result<(Option<Tensor<F>>, DenseParams<F>)> {
    expect_shape(upstream, &[cache.input.shape()[0], p.classes()], "dense upstream")?;
    let weight = upstream.matmul_at(&cache.input)?;
    let mut bias = p.bias.zeros_like();
    for t in 0..upstream.shape()[0] {
        for (b, &g) in bias.data_mut().iter_mut().zip(upstream.row(t)) {
            *b += g;
        }
    }
    let dx = if need_input_grad {
        Some(upstream.matmul(&p.weight)?)
    } else {
        None
    };
    Ok((dx, DenseParams { weight, bias }))
}
