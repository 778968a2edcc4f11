use rand::Rng;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

use super::expect_shape;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Train,
    Infer,
}

/// Survivor scale mask; `None` when the layer acted as the identity.
pub struct DropoutCache<F> {
    mask: Option<Tensor<F>>,
}

/// Inverted dropout: in training each element is zeroed with probability
/// `rate` and survivors are scaled by `1 / (1 - rate)`.
pub fn dropout<F: Scalar, R: Rng + ?Sized>(
    x: Tensor<F>,
    rate: f64,
    mode: Mode,
    rng: &mut R,
) -> Result<(Tensor<F>, DropoutCache<F>)> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::Config(format!("dropout rate {rate} outside [0, 1)")));
    }
    if mode == Mode::Infer || rate == 0.0 {
        return Ok((x, DropoutCache { mask: None }));
    }
    let keep = F::of(1.0 / (1.0 - rate));
    let m: Vec<F> = (0..x.len())
        .map(|_| if rng.gen::<f64>() < rate { F::zero() } else { keep })
        .collect();
    let mask = Tensor::from_vec(x.shape(), m)?;
    let y = x.mul(&mask)?;
    Ok((y, DropoutCache { mask: Some(mask) }))
}

pub fn dropout_backward<F: Scalar>(cache: &DropoutCache<F>, upstream: Tensor<F>) -> Result<Tensor<F>> {
    match &cache.mask {
        None => Ok(upstream),
        Some(mask) => {
            expect_shape(&upstream, mask.shape(), "dropout upstream")?;
            upstream.mul(mask)
        }
    }
}
