//! LSTM without peepholes and its bidirectional wrapper.
//!
//! Gate rows of every weight tensor are stacked in the order input, forget,
//! cell candidate, output, each block `units` rows tall:
//!
//! ```text
//! z = W_input x_t + W_recurrent h_{t-1} + bias
//! i = σ(z_i)  f = σ(z_f)  g = tanh(z_g)  o = σ(z_o)
//! c_t = f ⊙ c_{t-1} + i ⊙ g
//! h_t = o ⊙ tanh(c_t)
//! ```
//!
//! `h_{-1}` and `c_{-1}` are zero.

use rand::Rng;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::{axpy, dot, gemm_tn, Tensor};

use super::{expect_shape, glorot_bound};

#[derive(Clone, Debug, PartialEq)]
pub struct LstmParams<F = f64> {
    /// `[4U, I]`
    pub w_input: Tensor<F>,
    /// `[4U, U]`
    pub w_recurrent: Tensor<F>,
    /// `[4U]`
    pub bias: Tensor<F>,
}

impl<F: Scalar> LstmParams<F> {
    pub fn init<R: Rng + ?Sized>(input: usize, units: usize, rng: &mut R) -> Result<Self> {
        Ok(LstmParams {
            w_input: Tensor::uniform(&[4 * units, input], glorot_bound(input, 4 * units), rng)?,
            w_recurrent: Tensor::uniform(&[4 * units, units], glorot_bound(units, 4 * units), rng)?,
            bias: Tensor::zeros(&[4 * units])?,
        })
    }

    pub fn zeros(input: usize, units: usize) -> Result<Self> {
        Ok(LstmParams {
            w_input: Tensor::zeros(&[4 * units, input])?,
            w_recurrent: Tensor::zeros(&[4 * units, units])?,
            bias: Tensor::zeros(&[4 * units])?,
        })
    }

    pub fn zeros_like(&self) -> Self {
        LstmParams {
            w_input: self.w_input.zeros_like(),
            w_recurrent: self.w_recurrent.zeros_like(),
            bias: self.bias.zeros_like(),
        }
    }

    pub fn units(&self) -> usize {
        self.w_recurrent.shape()[1]
    }

    pub fn input_size(&self) -> usize {
        self.w_input.shape()[1]
    }

    fn validate(&self) -> Result<()> {
        let u = self.units();
        if self.w_recurrent.shape() != [4 * u, u] || self.bias.shape() != [4 * u] || self.w_input.shape()[0] != 4 * u {
            return Err(Error::shape("inconsistent LSTM parameter shapes"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Reverse,
}

pub struct LstmCache<F> {
    direction: Direction,
    /// Input in processing order.
    input: Tensor<F>,
    /// Gate activations `[T, 4U]` in processing order.
    gates: Vec<F>,
    cell: Vec<F>,
    cell_tanh: Vec<F>,
    hidden: Vec<F>,
}

fn reverse_rows<F: Scalar>(x: &Tensor<F>) -> Tensor<F> {
    let t = x.shape()[0];
    let w = x.len() / t;
    let mut out = Vec::with_capacity(x.len());
    for r in (0..t).rev() {
        out.extend_from_slice(&x.data()[r * w..(r + 1) * w]);
    }
    Tensor::from_vec(x.shape(), out).expect("same shape")
}

#[inline]
fn sigmoid<F: Scalar>(x: F) -> F {
    F::one() / (F::one() + (-x).exp())
}

pub fn lstm_forward<F: Scalar>(
    p: &LstmParams<F>,
    seq: &Tensor<F>,
    direction: Direction,
) -> Result<(Tensor<F>, LstmCache<F>)> {
    p.validate()?;
    let (t_len, i_len) = match *seq.shape() {
        [t, i] => (t, i),
        _ => return Err(Error::shape(format!("LSTM input must be [T,I], got {:?}", seq.shape()))),
    };
    if i_len != p.input_size() {
        return Err(Error::shape(format!(
            "LSTM expects {} input features, got {i_len}",
            p.input_size()
        )));
    }
    let u = p.units();
    let g4 = 4 * u;
    let input = match direction {
        Direction::Forward => seq.clone(),
        Direction::Reverse => reverse_rows(seq),
    };
    let mut gates = input.matmul_bt(&p.w_input)?.into_data();
    let mut cell = vec![F::zero(); t_len * u];
    let mut cell_tanh = vec![F::zero(); t_len * u];
    let mut hidden = vec![F::zero(); t_len * u];
    let wr = p.w_recurrent.data();
    let bias = p.bias.data();
    for t in 0..t_len {
        let z = &mut gates[t * g4..(t + 1) * g4];
        for (zi, &b) in z.iter_mut().zip(bias) {
            *zi += b;
        }
        if t > 0 {
            let h_prev = &hidden[(t - 1) * u..t * u];
            for (r, zr) in z.iter_mut().enumerate() {
                *zr += dot(&wr[r * u..(r + 1) * u], h_prev);
            }
        }
        for k in 0..u {
            let ig = sigmoid(z[k]);
            let fg = sigmoid(z[u + k]);
            let gg = z[2 * u + k].tanh();
            let og = sigmoid(z[3 * u + k]);
            z[k] = ig;
            z[u + k] = fg;
            z[2 * u + k] = gg;
            z[3 * u + k] = og;
            let c_prev = if t > 0 { cell[(t - 1) * u + k] } else { F::zero() };
            let c = fg * c_prev + ig * gg;
            let ct = c.tanh();
            cell[t * u + k] = c;
            cell_tanh[t * u + k] = ct;
            hidden[t * u + k] = og * ct;
        }
    }
    let out = Tensor::from_vec(&[t_len, u], hidden.clone())?;
    let out = match direction {
        Direction::Forward => out,
        Direction::Reverse => reverse_rows(&out),
    };
    Ok((
        out,
        LstmCache {
            direction,
            input,
            gates,
            cell,
            cell_tanh,
            hidden,
        },
    ))
}

pub fn lstm_backward<F: Scalar>(
    p: &LstmParams<F>,
    cache: &LstmCache<F>,
    upstream: &Tensor<F>,
    need_input_grad: bool,
) -> Result<(Option<Tensor<F>>, LstmParams<F>)> {
    let u = p.units();
    let g4 = 4 * u;
    let t_len = cache.input.shape()[0];
    expect_shape(upstream, &[t_len, u], "LSTM upstream")?;
    let dy = match cache.direction {
        Direction::Forward => upstream.clone(),
        Direction::Reverse => reverse_rows(upstream),
    };
    let dy = dy.data();
    let wr = p.w_recurrent.data();
    let mut dz = vec![F::zero(); t_len * g4];
    let mut dh_next = vec![F::zero(); u];
    let mut dc_next = vec![F::zero(); u];
    for t in (0..t_len).rev() {
        let a = &cache.gates[t * g4..(t + 1) * g4];
        let d = &mut dz[t * g4..(t + 1) * g4];
        for k in 0..u {
            let (ig, fg, gg, og) = (a[k], a[u + k], a[2 * u + k], a[3 * u + k]);
            let ct = cache.cell_tanh[t * u + k];
            let c_prev = if t > 0 { cache.cell[(t - 1) * u + k] } else { F::zero() };
            let dh = dy[t * u + k] + dh_next[k];
            let d_o = dh * ct;
            let dc = dh * og * (F::one() - ct * ct) + dc_next[k];
            d[k] = dc * gg * ig * (F::one() - ig);
            d[u + k] = dc * c_prev * fg * (F::one() - fg);
            d[2 * u + k] = dc * ig * (F::one() - gg * gg);
            d[3 * u + k] = d_o * og * (F::one() - og);
            dc_next[k] = dc * fg;
        }
        dh_next.iter_mut().for_each(|v| *v = F::zero());
        if t > 0 {
            for (r, &dzr) in d.iter().enumerate() {
                if dzr != F::zero() {
                    axpy(dzr, &wr[r * u..(r + 1) * u], &mut dh_next);
                }
            }
        }
    }
    let dz_t = Tensor::from_vec(&[t_len, g4], dz)?;
    let w_input = dz_t.matmul_at(&cache.input)?;
    let mut w_recurrent = p.w_recurrent.zeros_like();
    if t_len > 1 {
        gemm_tn(
            &dz_t.data()[g4..],
            &cache.hidden[..(t_len - 1) * u],
            w_recurrent.data_mut(),
            t_len - 1,
            g4,
            u,
        );
    }
    let mut bias = p.bias.zeros_like();
    for t in 0..t_len {
        axpy(F::one(), dz_t.row(t), bias.data_mut());
    }
    let dx = if need_input_grad {
        let dx = dz_t.matmul(&p.w_input)?;
        Some(match cache.direction {
            Direction::Forward => dx,
            Direction::Reverse => reverse_rows(&dx),
        })
    } else {
        None
    };
    Ok((
        dx,
        LstmParams {
            w_input,
            w_recurrent,
            bias,
        },
    ))
}

#[derive(Clone, Debug, PartialEq)]
pub struct BlstmParams<F = f64> {
    pub fwd: LstmParams<F>,
    pub bwd: LstmParams<F>,
}

impl<F: Scalar> BlstmParams<F> {
    pub fn init<R: Rng + ?Sized>(input: usize, units: usize, rng: &mut R) -> Result<Self> {
        Ok(BlstmParams {
            fwd: LstmParams::init(input, units, rng)?,
            bwd: LstmParams::init(input, units, rng)?,
        })
    }

    pub fn zeros_like(&self) -> Self {
        BlstmParams {
            fwd: self.fwd.zeros_like(),
            bwd: self.bwd.zeros_like(),
        }
    }
}

pub struct BlstmCache<F> {
    fwd: LstmCache<F>,
    bwd: LstmCache<F>,
}

/// Per-timestep concatenation `[forward | reverse]`, shape `[T, 2U]`.
pub fn blstm<F: Scalar>(p: &BlstmParams<F>, seq: &Tensor<F>) -> Result<(Tensor<F>, BlstmCache<F>)> {
    let (yf, cf) = lstm_forward(&p.fwd, seq, Direction::Forward)?;
    let (yb, cb) = lstm_forward(&p.bwd, seq, Direction::Reverse)?;
    let t_len = seq.shape()[0];
    let (uf, ub) = (p.fwd.units(), p.bwd.units());
    let mut out = Vec::with_capacity(t_len * (uf + ub));
    for t in 0..t_len {
        out.extend_from_slice(yf.row(t));
        out.extend_from_slice(yb.row(t));
    }
    Ok((Tensor::from_vec(&[t_len, uf + ub], out)?, BlstmCache { fwd: cf, bwd: cb }))
}

pub fn blstm_backward<F: Scalar>(
    p: &BlstmParams<F>,
    cache: &BlstmCache<F>,
    upstream: &Tensor<F>,
    need_input_grad: bool,
) -> Result<(Option<Tensor<F>>, BlstmParams<F>)> {
    let (uf, ub) = (p.fwd.units(), p.bwd.units());
    let t_len = cache.fwd.input.shape()[0];
    expect_shape(upstream, &[t_len, uf + ub], "BLSTM upstream")?;
    let mut gf = Vec::with_capacity(t_len * uf);
    let mut gb = Vec::with_capacity(t_len * ub);
    for t in 0..t_len {
        let row = upstream.row(t);
        gf.extend_from_slice(&row[..uf]);
        gb.extend_from_slice(&row[uf..]);
    }
    let (dxf, pf) = lstm_backward(&p.fwd, &cache.fwd, &Tensor::from_vec(&[t_len, uf], gf)?, need_input_grad)?;
    let (dxb, pb) = lstm_backward(&p.bwd, &cache.bwd, &Tensor::from_vec(&[t_len, ub], gb)?, need_input_grad)?;
    let dx = match (dxf, dxb) {
        (Some(mut a), Some(b)) => {
            a.add_assign(&b)?;
            Some(a)
        }
        _ => None,
    };
    Ok((dx, BlstmParams { fwd: pf, bwd: pb }))
}
