//! Forward and backward kernels for every layer of the recognizer.
//!
//! Each `forward` returns the output together with the state its matching
//! `backward` needs. Backward functions take the upstream gradient and return
//! the gradient with respect to the layer input (when requested) and the
//! parameter gradients.

mod activation;
mod collapse;
mod conv;
mod dense;
mod dropout;
mod lstm;
mod pool;

pub use activation::{leaky_relu, leaky_relu_backward, LeakyCache};
pub use collapse::{collapse_columns, expand_columns};
pub use conv::{conv2d, conv2d_backward, ConvCache, ConvParams};
pub use dense::{dense, dense_backward, DenseCache, DenseParams};
pub use dropout::{dropout, dropout_backward, DropoutCache, Mode};
pub use lstm::{
    blstm, blstm_backward, lstm_backward, lstm_forward, BlstmCache, BlstmParams, Direction,
    LstmCache, LstmParams,
};
pub use pool::{maxpool2x2, maxpool2x2_backward, PoolCache};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

pub(crate) fn expect_shape<F: Scalar>(t: &Tensor<F>, shape: &[usize], what: &str) -> Result<()> {
    if t.shape() != shape {
        return Err(Error::shape(format!(
            "{what}: expected {shape:?}, got {:?}",
            t.shape()
        )));
    }
    Ok(())
}

pub(crate) fn glorot_bound<F: Scalar>(fan_in: usize, fan_out: usize) -> F {
    F::of((6.0 / (fan_in + fan_out) as f64).sqrt())
}
