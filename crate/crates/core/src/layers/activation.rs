use crate::error::Result;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

use super::expect_shape;

pub struct LeakyCache<F> {
    input: Tensor<F>,
    slope: F,
}

/// `x` for `x >= 0`, `slope * x` otherwise.
pub fn leaky_relu<F: Scalar>(x: Tensor<F>, slope: F) -> (Tensor<F>, LeakyCache<F>) {
    let y = x.map(|v| if v >= F::zero() { v } else { slope * v });
    (y, LeakyCache { input: x, slope })
}

pub fn leaky_relu_backward<F: Scalar>(cache: &LeakyCache<F>, upstream: &Tensor<F>) -> Result<Tensor<F>> {
    expect_shape(upstream, cache.input.shape(), "leaky relu upstream")?;
    let slope = cache.slope;
    cache
        .input
        .zip_with(upstream, |x, g| if x >= F::zero() { g } else { slope * g })
}
