//! Oracles shared by the integration tests. Nothing here calls into the
//! library's CTC or layer code, so agreement is evidence of correctness.
#![allow(dead_code)]

use htr_core::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub mod grad;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_tensor(shape: &[usize], scale: f64, rng: &mut ChaCha8Rng) -> Tensor<f64> {
    let n = shape.iter().product();
    Tensor::from_vec(shape, (0..n).map(|_| rng.gen_range(-scale..scale)).collect()).unwrap()
}

/// Paths longer than this many alignments are refused.
pub const BRUTE_FORCE_LIMIT: f64 = 1e7;

/// Merge repeats, then drop `blank`.
fn collapse(path: &[usize], blank: usize) -> Vec<usize> {
    let mut out = Vec::new();
    for (i, &k) in path.iter().enumerate() {
        if k != blank && (i == 0 || path[i - 1] != k) {
            out.push(k);
        }
    }
    out
}

/// `-ln p(target | logits)` by summing the probability of every frame-level
/// path of length `input_len` that collapses to `target`. The blank is the
/// last class. Returns `+inf` when no path matches.
pub fn ctc_bruteforce(logits: &Tensor<f64>, target: &[usize], input_len: usize) -> Result<f64, String> {
    let classes = logits.shape()[1];
    if (classes as f64).powi(input_len as i32) > BRUTE_FORCE_LIMIT {
        return Err(format!("{classes}^{input_len} paths exceed the enumeration limit"));
    }
    let probs: Vec<Vec<f64>> = (0..input_len)
        .map(|t| {
            let row = logits.row(t);
            let z: f64 = row.iter().map(|v| v.exp()).sum();
            row.iter().map(|v| v.exp() / z).collect()
        })
        .collect();
    let blank = classes - 1;
    let mut path = vec![0usize; input_len];
    let mut total = 0.0;
    loop {
        if collapse(&path, blank) == target {
            total += path.iter().enumerate().map(|(t, &k)| probs[t][k]).product::<f64>();
        }
        // odometer increment
        let mut t = 0;
        while t < input_len {
            path[t] += 1;
            if path[t] < classes {
                break;
            }
            path[t] = 0;
            t += 1;
        }
        if t == input_len {
            break;
        }
    }
    Ok(-total.ln())
}

/// `|a - n| / max(|a|, |n|, floor)`. The floor keeps gradients that are
/// zero up to roundoff from reporting huge relative errors.
pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    const FLOOR: f64 = 1e-6;
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(FLOOR)
}

pub const FD_STEP: f64 = 1e-5;

/// Largest relative error between `analytic` (the gradient of `loss` with
/// respect to `inputs[which]`) and central differences, over `indices` or
/// every element.
pub fn fd_check(
    inputs: &[Tensor<f64>],
    which: usize,
    analytic: &Tensor<f64>,
    loss: impl Fn(&[Tensor<f64>]) -> f64,
    indices: Option<&[usize]>,
) -> f64 {
    assert_eq!(analytic.shape(), inputs[which].shape(), "gradient shape of input {which}");
    let all: Vec<usize> = (0..analytic.len()).collect();
    let indices = indices.unwrap_or(&all);
    let mut worst: f64 = 0.0;
    let mut work = inputs.to_vec();
    for &i in indices {
        let x0 = work[which].data()[i];
        work[which].data_mut()[i] = x0 + FD_STEP;
        let up = loss(&work);
        work[which].data_mut()[i] = x0 - FD_STEP;
        let down = loss(&work);
        work[which].data_mut()[i] = x0;
        let numeric = (up - down) / (2.0 * FD_STEP);
        worst = worst.max(rel_err(analytic.data()[i], numeric));
    }
    worst
}

/// `sum(y * r)`: a scalar loss whose gradient with respect to `y` is `r`.
pub fn project(y: &Tensor<f64>, r: &Tensor<f64>) -> f64 {
    y.data().iter().zip(r.data()).map(|(a, b)| a * b).sum()
}

/// Outcome of comparing the dynamic-programming CTC loss with
/// [`ctc_bruteforce`] over random instances.
#[derive(Debug, Default)]
pub struct CtcSweep {
    pub feasible: usize,
    pub infeasible: usize,
    pub max_diff: f64,
    /// Instances where exactly one side judged the target impossible.
    pub disagreements: usize,
}

/// `count` feasible instances with `T <= 8` and at most 3 characters, plus
/// whatever infeasible ones the generator produces on the way.
pub fn ctc_sweep(seed: u64, count: usize) -> CtcSweep {
    use htr_core::ctc::{ctc_forward_backward, LabelSeq};
    let mut r = rng(seed);
    let mut out = CtcSweep::default();
    while out.feasible < count {
        let t_len = r.gen_range(1..=8);
        let letters = r.gen_range(1..=3);
        let len = r.gen_range(0..=t_len.min(5));
        let target: Vec<usize> = (0..len).map(|_| r.gen_range(0..letters)).collect();
        let logits = random_tensor(&[t_len, letters + 1], 3.0, &mut r);
        let brute = ctc_bruteforce(&logits, &target, t_len).expect("within enumeration limit");
        match ctc_forward_backward(&logits, &LabelSeq(target), t_len) {
            Ok(o) => {
                out.feasible += 1;
                if brute.is_finite() {
                    out.max_diff = out.max_diff.max((o.loss - brute).abs());
                } else {
                    out.disagreements += 1;
                }
            }
            Err(_) => {
                out.infeasible += 1;
                if brute.is_finite() {
                    out.disagreements += 1;
                }
            }
        }
    }
    out
}
