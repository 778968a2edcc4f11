use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// `[W, H, D] -> [W, H*D]`: column `x` becomes timestep `x`, with feature
/// `y * D + c` holding element `(x, y, c)`.
///
/// In row-major layout this is a relabelling of the shape only.
pub fn collapse_columns<F: Scalar>(x: Tensor<F>) -> Result<Tensor<F>> {
    match *x.shape() {
        [w, h, d] => x.reshape(&[w, h * d]),
        _ => Err(Error::shape(format!(
            "collapse expects [W,H,D], got {:?}",
            x.shape()
        ))),
    }
}

/// Inverse of [`collapse_columns`].
pub fn expand_columns<F: Scalar>(x: Tensor<F>, height: usize, depth: usize) -> Result<Tensor<F>> {
    match *x.shape() {
        [w, f] if f == height * depth => x.reshape(&[w, height, depth]),
        _ => Err(Error::shape(format!(
            "cannot expand {:?} into height {height} depth {depth}",
            x.shape()
        ))),
    }
}
