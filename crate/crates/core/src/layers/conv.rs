use rand::Rng;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::{axpy, dot, Tensor};

use super::{expect_shape, glorot_bound};

pub const KERNEL: usize = 3;

/// 3x3 convolution weights, kernel laid out `[kx, ky, c_in, c_out]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvParams<F = f64> {
    pub kernel: Tensor<F>,
    pub bias: Tensor<F>,
}

impl<F: Scalar> ConvParams<F> {
    pub fn init<R: Rng + ?Sized>(c_in: usize, c_out: usize, rng: &mut R) -> Result<Self> {
        let bound = glorot_bound(KERNEL * KERNEL * c_in, KERNEL * KERNEL * c_out);
        Ok(ConvParams {
            kernel: Tensor::uniform(&[KERNEL, KERNEL, c_in, c_out], bound, rng)?,
            bias: Tensor::zeros(&[c_out])?,
        })
    }

    pub fn zeros_like(&self) -> Self {
        ConvParams {
            kernel: self.kernel.zeros_like(),
            bias: self.bias.zeros_like(),
        }
    }

    pub fn c_in(&self) -> usize {
        self.kernel.shape()[2]
    }

    pub fn c_out(&self) -> usize {
        self.kernel.shape()[3]
    }
}

pub struct ConvCache<F> {
    input: Tensor<F>,
    out_shape: [usize; 3],
}

fn dims3<F: Scalar>(x: &Tensor<F>) -> Result<(usize, usize, usize)> {
    match *x.shape() {
        [w, h, c] => Ok((w, h, c)),
        _ => Err(Error::shape(format!("conv input must be [W,H,C], got {:?}", x.shape()))),
    }
}

/// Neighbour coordinate for kernel tap `k` around `p`, or `None` in the zero border.
#[inline]
fn tap(p: usize, k: usize, extent: usize) -> Option<usize> {
    let q = (p + k).checked_sub(1)?;
    (q < extent).then_some(q)
}

/// Same-padded 3x3 cross-correlation with stride 1, plus bias.
pub fn conv2d<F: Scalar>(p: &ConvParams<F>, x: Tensor<F>) -> Result<(Tensor<F>, ConvCache<F>)> {
    let (w, h, c_in) = dims3(&x)?;
    if c_in != p.c_in() {
        return Err(Error::shape(format!(
            "conv expects {} input channels, got {c_in}",
            p.c_in()
        )));
    }
    let c_out = p.c_out();
    let k = p.kernel.data();
    let xin = x.data();
    let mut out = vec![F::zero(); w * h * c_out];
    for px in 0..w {
        for py in 0..h {
            let o = &mut out[(px * h + py) * c_out..(px * h + py + 1) * c_out];
            o.copy_from_slice(p.bias.data());
            for kx in 0..KERNEL {
                let Some(ix) = tap(px, kx, w) else { continue };
                for ky in 0..KERNEL {
                    let Some(iy) = tap(py, ky, h) else { continue };
                    let src = &xin[(ix * h + iy) * c_in..(ix * h + iy + 1) * c_in];
                    let slab = &k[(kx * KERNEL + ky) * c_in * c_out..];
                    for (ci, &v) in src.iter().enumerate() {
                        if v != F::zero() {
                            axpy(v, &slab[ci * c_out..(ci + 1) * c_out], o);
                        }
                    }
                }
            }
        }
    }
    let y = Tensor::from_vec(&[w, h, c_out], out)?;
    Ok((
        y,
        ConvCache {
            input: x,
            out_shape: [w, h, c_out],
        },
    ))
}

/// Returns `(input gradient if requested, parameter gradients)`.
pub fn conv2d_backward<F: Scalar>(
    p: &ConvParams<F>,
    cache: &ConvCache<F>,
    upstream: &Tensor<F>,
    need_input_grad: bool,
) -> Result<(Option<Tensor<F>>, ConvParams<F>)> {
    expect_shape(upstream, &cache.out_shape, "conv upstream")?;
    let [w, h, c_out] = cache.out_shape;
    let c_in = p.c_in();
    let k = p.kernel.data();
    let xin = cache.input.data();
    let dy = upstream.data();

    let mut grads = p.zeros_like();
    let mut dx = need_input_grad.then(|| vec![F::zero(); w * h * c_in]);
    {
        let db = grads.bias.data_mut();
        for px in 0..w * h {
            axpy(F::one(), &dy[px * c_out..(px + 1) * c_out], db);
        }
    }
    let dk = grads.kernel.data_mut();
    for px in 0..w {
        for py in 0..h {
            let g = &dy[(px * h + py) * c_out..(px * h + py + 1) * c_out];
            for kx in 0..KERNEL {
                let Some(ix) = tap(px, kx, w) else { continue };
                for ky in 0..KERNEL {
                    let Some(iy) = tap(py, ky, h) else { continue };
                    let base = (ix * h + iy) * c_in;
                    let slab_off = (kx * KERNEL + ky) * c_in * c_out;
                    for ci in 0..c_in {
                        let row = slab_off + ci * c_out..slab_off + (ci + 1) * c_out;
                        let v = xin[base + ci];
                        if v != F::zero() {
                            axpy(v, g, &mut dk[row.clone()]);
                        }
                        if let Some(dx) = dx.as_mut() {
                            dx[base + ci] += dot(&k[row], g);
                        }
                    }
                }
            }
        }
    }
    let dx = dx.map(|d| Tensor::from_vec(&[w, h, c_in], d)).transpose()?;
    Ok((dx, grads))
}
