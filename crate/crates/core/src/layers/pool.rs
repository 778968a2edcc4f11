use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

use super::expect_shape;

/// Flat input offset of the maximum chosen for every output element.
pub struct PoolCache {
    argmax: Vec<usize>,
    in_shape: [usize; 3],
    out_shape: [usize; 3],
}

impl PoolCache {
    pub fn argmax(&self) -> &[usize] {
        &self.argmax
    }
}

/// 2x2 max pooling with stride 2. A trailing odd row or column is dropped.
/// Within a block the first maximum in `(dx, dy)` scan order wins.
pub fn maxpool2x2<F: Scalar>(x: &Tensor<F>) -> Result<(Tensor<F>, PoolCache)> {
    let (w, h, c) = match *x.shape() {
        [w, h, c] => (w, h, c),
        _ => return Err(Error::shape(format!("pool input must be [W,H,C], got {:?}", x.shape()))),
    };
    if w < 2 || h < 2 {
        return Err(Error::shape(format!("pool needs extents >= 2, got {:?}", x.shape())));
    }
    let (ow, oh) = (w / 2, h / 2);
    let xd = x.data();
    let mut out = vec![F::zero(); ow * oh * c];
    let mut argmax = vec![0usize; ow * oh * c];
    for ox in 0..ow {
        for oy in 0..oh {
            for ch in 0..c {
                let mut best = usize::MAX;
                for dx in 0..2 {
                    for dy in 0..2 {
                        let off = ((2 * ox + dx) * h + 2 * oy + dy) * c + ch;
                        if best == usize::MAX || xd[off] > xd[best] {
                            best = off;
                        }
                    }
                }
                let o = (ox * oh + oy) * c + ch;
                out[o] = xd[best];
                argmax[o] = best;
            }
        }
    }
    Ok((
        Tensor::from_vec(&[ow, oh, c], out)?,
        PoolCache {
            argmax,
            in_shape: [w, h, c],
            out_shape: [ow, oh, c],
        },
    ))
}

pub fn maxpool2x2_backward<F: Scalar>(cache: &PoolCache, upstream: &Tensor<F>) -> Result<Tensor<F>> {
    expect_shape(upstream, &cache.out_shape, "pool upstream")?;
    let mut dx = Tensor::zeros(&cache.in_shape)?;
    let d = dx.data_mut();
    for (&src, &g) in cache.argmax.iter().zip(upstream.data()) {
        d[src] += g;
    }
    Ok(dx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_block() {
        // element (x, y): [[1,2],[3,4]] with x as row
        let x = Tensor::from_vec(&[2, 2, 1], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let (y, cache) = maxpool2x2(&x).unwrap();
        assert_eq!(y.data(), &[4.0]);
        assert_eq!(cache.argmax(), &[3]);
    }

    #[test]
    fn constant_and_odd_extents() {
        let x = Tensor::full(&[5, 7, 2], 3.0).unwrap();
        let (y, _) = maxpool2x2(&x).unwrap();
        assert_eq!(y.shape(), &[2, 3, 2]);
        assert!(y.data().iter().all(|&v| v == 3.0));
    }

    #[test]
    fn degenerate_extent() {
        assert!(maxpool2x2(&Tensor::<f64>::zeros(&[1, 4, 1]).unwrap()).is_err());
    }
}
