//! Connectionist temporal classification: loss, gradient, and best-path
//! decoding.
//!
//! The blank label takes the last class index, so a model over an alphabet
//! of `L` characters produces `L + 1` scores per timestep and character
//! indices stay stable when the output layer is resized.
//!
//! All forward/backward recursions run in the log domain.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::{log_add, log_softmax_in_place, Tensor};

/// Character indices of a transcript. Never contains the blank.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct LabelSeq(pub Vec<usize>);

impl LabelSeq {
    pub fn new(labels: Vec<usize>, blank: usize) -> Result<Self> {
        if let Some(&bad) = labels.iter().find(|&&l| l >= blank) {
            return Err(Error::LabelRange {
                index: bad,
                classes: blank,
            });
        }
        Ok(LabelSeq(labels))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    /// Number of adjacent equal pairs; each forces a blank between them.
    pub fn repeats(&self) -> usize {
        self.0.windows(2).filter(|w| w[0] == w[1]).count()
    }

    /// Fewest timesteps any alignment of this sequence needs.
    pub fn min_frames(&self) -> usize {
        self.len() + self.repeats()
    }
}

/// Merge consecutive duplicates, then drop blanks.
pub fn collapse_path(path: &[usize], blank: usize) -> Result<LabelSeq> {
    let mut out = Vec::new();
    let mut prev = None;
    for &k in path {
        if k > blank {
            return Err(Error::LabelRange {
                index: k,
                classes: blank + 1,
            });
        }
        if Some(k) != prev && k != blank {
            out.push(k);
        }
        prev = Some(k);
    }
    Ok(LabelSeq(out))
}

/// Blank-interleaved sequence `[-, l1, -, l2, ..., -]` of length `2|l| + 1`.
pub fn extend_labels(l: &LabelSeq, blank: usize) -> Vec<usize> {
    let mut ext = Vec::with_capacity(2 * l.len() + 1);
    ext.push(blank);
    for &c in l.as_slice() {
        ext.push(c);
        ext.push(blank);
    }
    ext
}

/// Log-domain forward and backward tables over the extended label sequence.
///
/// Both tables include the emission at their own timestep, so for every `t`
/// `logsumexp_s(alpha[t,s] + beta[t,s] - log_py[t, l'(s)]) = log p(l|x)`.
#[derive(Clone, Debug)]
pub struct CtcTables<F = f64> {
    pub alpha: Tensor<F>,
    pub beta: Tensor<F>,
    pub log_py: Tensor<F>,
    pub extended: Vec<usize>,
    pub log_likelihood: F,
}

#[derive(Clone, Debug)]
pub struct CtcOutput<F = f64> {
    pub loss: F,
    /// Derivative of `loss` with respect to the logits, zero past `input_len`.
    pub grad: Tensor<F>,
}

fn check_feasible(target: &LabelSeq, input_len: usize) -> Result<()> {
    let required = target.min_frames().max(1);
    if input_len < required {
        return Err(Error::CtcInfeasible {
            label_len: target.len(),
            repeats: target.repeats(),
            required,
            available: input_len,
        });
    }
    Ok(())
}

/// Build the forward/backward tables for the first `input_len` timesteps.
pub fn ctc_tables<F: Scalar>(logits: &Tensor<F>, target: &LabelSeq, input_len: usize) -> Result<CtcTables<F>> {
    let (t_max, classes) = match *logits.shape() {
        [t, c] => (t, c),
        _ => return Err(Error::shape(format!("CTC logits must be [T,C], got {:?}", logits.shape()))),
    };
    if input_len > t_max {
        return Err(Error::shape(format!("input length {input_len} exceeds {t_max} timesteps")));
    }
    let blank = classes - 1;
    let target = LabelSeq::new(target.0.clone(), blank)?;
    check_feasible(&target, input_len)?;

    let t_len = input_len;
    let mut log_py = Vec::with_capacity(t_len * classes);
    for t in 0..t_len {
        let start = log_py.len();
        log_py.extend_from_slice(logits.row(t));
        log_softmax_in_place(&mut log_py[start..]);
    }
    let ext = extend_labels(&target, blank);
    let s_len = ext.len();
    let ninf = F::neg_infinity();
    let emit = |t: usize, s: usize| log_py[t * classes + ext[s]];
    // s - 2 is reachable when l'(s) is a label differing from l'(s-2).
    let can_skip = |s: usize| s >= 2 && ext[s] != blank && ext[s] != ext[s - 2];

    let mut alpha = vec![ninf; t_len * s_len];
    alpha[0] = emit(0, 0);
    if s_len > 1 {
        alpha[1] = emit(0, 1);
    }
    for t in 1..t_len {
        let (prev, cur) = alpha.split_at_mut(t * s_len);
        let prev = &prev[(t - 1) * s_len..];
        for s in 0..s_len {
            let mut acc = prev[s];
            if s >= 1 {
                acc = log_add(acc, prev[s - 1]);
            }
            if can_skip(s) {
                acc = log_add(acc, prev[s - 2]);
            }
            cur[s] = if acc == ninf { ninf } else { acc + emit(t, s) };
        }
    }

    let mut beta = vec![ninf; t_len * s_len];
    let last = (t_len - 1) * s_len;
    beta[last + s_len - 1] = emit(t_len - 1, s_len - 1);
    if s_len > 1 {
        beta[last + s_len - 2] = emit(t_len - 1, s_len - 2);
    }
    for t in (0..t_len - 1).rev() {
        let (cur, next) = beta.split_at_mut((t + 1) * s_len);
        let cur = &mut cur[t * s_len..];
        for s in 0..s_len {
            let mut acc = next[s];
            if s + 1 < s_len {
                acc = log_add(acc, next[s + 1]);
            }
            if s + 2 < s_len && can_skip(s + 2) {
                acc = log_add(acc, next[s + 2]);
            }
            cur[s] = if acc == ninf { ninf } else { acc + emit(t, s) };
        }
    }

    let mut ll = alpha[last + s_len - 1];
    if s_len > 1 {
        ll = log_add(ll, alpha[last + s_len - 2]);
    }
    Ok(CtcTables {
        alpha: Tensor::from_vec(&[t_len, s_len], alpha)?,
        beta: Tensor::from_vec(&[t_len, s_len], beta)?,
        log_py: Tensor::from_vec(&[t_len, classes], log_py)?,
        extended: ext,
        log_likelihood: ll,
    })
}

/// Negative log-likelihood of `target` and its gradient with respect to the
/// unnormalized `logits`. Rows at or past `input_len` receive zero gradient.
pub fn ctc_forward_backward<F: Scalar>(logits: &Tensor<F>, target: &LabelSeq, input_len: usize) -> Result<CtcOutput<F>> {
    let tables = ctc_tables(logits, target, input_len)?;
    let classes = logits.shape()[1];
    let s_len = tables.extended.len();
    let ll = tables.log_likelihood;
    let mut grad = logits.zeros_like();
    let ninf = F::neg_infinity();
    let mut post = vec![ninf; classes];
    for t in 0..input_len {
        post.iter_mut().for_each(|v| *v = ninf);
        let a = tables.alpha.row(t);
        let b = tables.beta.row(t);
        let lp = tables.log_py.row(t);
        for s in 0..s_len {
            let k = tables.extended[s];
            post[k] = log_add(post[k], a[s] + b[s] - lp[k]);
        }
        let g = grad.row_mut(t);
        for k in 0..classes {
            // softmax - posterior occupancy
            g[k] = lp[k].exp() - (post[k] - ll).exp();
        }
    }
    Ok(CtcOutput { loss: -ll, grad })
}

/// Best-path decoding over the first `input_len` timesteps: argmax per frame
/// (lowest index wins ties), then [`collapse_path`].
pub fn greedy_decode<F: Scalar>(scores: &Tensor<F>, input_len: usize) -> LabelSeq {
    let classes = scores.shape()[1];
    let t_len = input_len.min(scores.shape()[0]);
    let path: Vec<usize> = (0..t_len)
        .map(|t| {
            let row = scores.row(t);
            let mut best = 0;
            for k in 1..classes {
                if row[k] > row[best] {
                    best = k;
                }
            }
            best
        })
        .collect();
    collapse_path(&path, classes - 1).expect("argmax is within class range")
}
