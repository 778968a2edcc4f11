//! Adam with per-layer freezing.

use crate::error::{Error, Result};
use crate::model::FreezeSpec;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Anything that exposes its parameter tensors in a fixed canonical order.
pub trait ParamSet<F: Scalar> {
    fn named_tensors(&self) -> Vec<(String, &Tensor<F>)>;
    fn named_tensors_mut(&mut self) -> Vec<(String, &mut Tensor<F>)>;
}

/// Layer owning a parameter tensor: the name up to the first `.`.
pub fn layer_of(name: &str) -> &str {
    name.split('.').next().unwrap_or(name)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamHyper {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamHyper {
    fn default() -> Self {
        AdamHyper {
            lr: 0.003,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl AdamHyper {
    pub fn validate(&self) -> Result<()> {
        let ok = self.lr > 0.0
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.epsilon > 0.0;
        if !ok {
            return Err(Error::Config(format!("invalid Adam hyperparameters {self:?}")));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct AdamState<F = f64> {
    pub hyper: AdamHyper,
    pub step: u64,
    names: Vec<String>,
    first: Vec<Tensor<F>>,
    second: Vec<Tensor<F>>,
}

impl<F: Scalar> AdamState<F> {
    pub fn new<P: ParamSet<F> + ?Sized>(params: &P, hyper: AdamHyper) -> Result<Self> {
        hyper.validate()?;
        let named = params.named_tensors();
        Ok(AdamState {
            hyper,
            step: 0,
            names: named.iter().map(|(n, _)| n.clone()).collect(),
            first: named.iter().map(|(_, t)| t.zeros_like()).collect(),
            second: named.iter().map(|(_, t)| t.zeros_like()).collect(),
        })
    }

    pub fn first_moments(&self) -> &[Tensor<F>] {
        &self.first
    }

    pub fn second_moments(&self) -> &[Tensor<F>] {
        &self.second
    }

    /// One bias-corrected update of every tensor whose layer is trainable.
    /// Frozen tensors and their moments are left untouched. Nothing is
    /// modified if any trainable gradient is non-finite.
    pub fn step<P: ParamSet<F> + ?Sized>(&mut self, params: &mut P, grads: &P, freeze: &FreezeSpec) -> Result<()> {
        let grads = grads.named_tensors();
        let mut params = params.named_tensors_mut();
        if grads.len() != self.names.len() || params.len() != self.names.len() {
            return Err(Error::shape("optimizer state does not match parameter set"));
        }
        let trainable: Vec<bool> = self.names.iter().map(|n| freeze.is_trainable(layer_of(n))).collect();
        for (i, (name, g)) in grads.iter().enumerate() {
            if *name != self.names[i] || params[i].0 != self.names[i] {
                return Err(Error::shape(format!("tensor order mismatch at `{}`", self.names[i])));
            }
            g.same_shape(params[i].1)?;
            if trainable[i] && !g.is_finite() {
                return Err(Error::Divergence(name.clone()));
            }
        }

        self.step += 1;
        let h = self.hyper;
        let t = self.step as i32;
        let (b1, b2) = (F::of(h.beta1), F::of(h.beta2));
        let c1 = F::one() / (F::one() - F::of(h.beta1.powi(t)));
        let c2 = F::one() / (F::one() - F::of(h.beta2.powi(t)));
        let (lr, eps) = (F::of(h.lr), F::of(h.epsilon));
        for (i, (_, p)) in params.iter_mut().enumerate() {
            if !trainable[i] {
                continue;
            }
            let g = grads[i].1.data();
            let m = self.first[i].data_mut();
            let v = self.second[i].data_mut();
            for (k, w) in p.data_mut().iter_mut().enumerate() {
                m[k] = b1 * m[k] + (F::one() - b1) * g[k];
                v[k] = b2 * v[k] + (F::one() - b2) * g[k] * g[k];
                let m_hat = m[k] * c1;
                let v_hat = v[k] * c2;
                *w -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}
