//! Finite-difference gradient checks shared by the `gradients` tests and the
//! acceptance runner. Each check returns `(what, relative error)` pairs.

use htr_core::ctc::{ctc_forward_backward, LabelSeq};
use htr_core::data::{Alphabet, Batch, LineImage, Sample};
use htr_core::layers::*;
use htr_core::model::{batch_loss_and_grad, FreezeSpec, Model, ModelConfig};
use htr_core::optim::ParamSet;
use htr_core::par::Exec;
use htr_core::Tensor;
use rand::seq::index;
use rand::Rng;

use super::{fd_check, project, random_tensor, rel_err, rng, FD_STEP};

pub const LAYER_TOL: f64 = 1e-4;
pub const END_TO_END_TOL: f64 = 1e-3;

pub type Errors = Vec<(String, f64)>;
pub type GradCheck = fn() -> Errors;

/// Every per-layer check, by name.
pub const LAYER_CHECKS: [(&str, GradCheck); 9] = [
    ("conv", conv_gradients),
    ("leaky relu", leaky_relu_gradient),
    ("maxpool", maxpool_gradient),
    ("collapse", collapse_gradient),
    ("dropout", dropout_gradient),
    ("dense", dense_gradients),
    ("lstm", lstm_gradients_both_directions),
    ("blstm", blstm_gradients),
    ("ctc", ctc_gradient),
];

pub fn worst(errs: &Errors) -> (String, f64) {
    errs.iter()
        .cloned()
        .fold((String::new(), 0.0), |a, b| if b.1 > a.1 { b } else { a })
}

pub fn conv_gradients() -> Errors {
    let mut errs = Errors::new();
    let mut r = rng(1);
    let x = random_tensor(&[5, 4, 2], 1.0, &mut r);
    let p = ConvParams::<f64>::init(2, 3, &mut r).unwrap();
    let bias = random_tensor(&[3], 0.5, &mut r);
    let proj = random_tensor(&[5, 4, 3], 1.0, &mut r);
    let inputs = vec![x, p.kernel, bias];
    let params = |t: &[Tensor<f64>]| ConvParams { kernel: t[1].clone(), bias: t[2].clone() };
    let loss = |t: &[Tensor<f64>]| project(&conv2d(&params(t), t[0].clone()).unwrap().0, &proj);

    let (_, cache) = conv2d(&params(&inputs), inputs[0].clone()).unwrap();
    let (dx, g) = conv2d_backward(&params(&inputs), &cache, &proj, true).unwrap();
    errs.push(("conv input".to_string(), fd_check(&inputs, 0, &dx.unwrap(), loss, None)));
    errs.push(("conv kernel".to_string(), fd_check(&inputs, 1, &g.kernel, loss, None)));
    errs.push(("conv bias".to_string(), fd_check(&inputs, 2, &g.bias, loss, None)));
    errs
}

pub fn leaky_relu_gradient() -> Errors {
    let mut errs = Errors::new();
    let mut r = rng(2);
    // keep inputs away from the kink at zero
    let x = random_tensor(&[6, 5, 2], 1.0, &mut r).map(|v| if v.abs() < 0.05 { v + 0.1 } else { v });
    let proj = random_tensor(&[6, 5, 2], 1.0, &mut r);
    let loss = |t: &[Tensor<f64>]| project(&leaky_relu(t[0].clone(), 0.01).0, &proj);
    let (_, cache) = leaky_relu(x.clone(), 0.01);
    let dx = leaky_relu_backward(&cache, &proj).unwrap();
    errs.push(("leaky relu".to_string(), fd_check(&[x], 0, &dx, loss, None)));
    errs
}

pub fn maxpool_gradient() -> Errors {
    let mut errs = Errors::new();
    let mut r = rng(3);
    let x = random_tensor(&[7, 6, 2], 1.0, &mut r);
    let proj = random_tensor(&[3, 3, 2], 1.0, &mut r);
    let loss = |t: &[Tensor<f64>]| project(&maxpool2x2(&t[0]).unwrap().0, &proj);
    let (_, cache) = maxpool2x2(&x).unwrap();
    let dx = maxpool2x2_backward(&cache, &proj).unwrap();
    errs.push(("maxpool".to_string(), fd_check(&[x], 0, &dx, loss, None)));
    errs
}

pub fn collapse_gradient() -> Errors {
    let mut errs = Errors::new();
    let mut r = rng(4);
    let x = random_tensor(&[4, 3, 2], 1.0, &mut r);
    let proj = random_tensor(&[4, 6], 1.0, &mut r);
    let loss = |t: &[Tensor<f64>]| project(&collapse_columns(t[0].clone()).unwrap(), &proj);
    let dx = expand_columns(proj.clone(), 3, 2).unwrap();
    errs.push(("collapse".to_string(), fd_check(&[x], 0, &dx, loss, None)));
    errs
}

pub fn dropout_gradient() -> Errors {
    let mut errs = Errors::new();
    let mut r = rng(5);
    let x = random_tensor(&[10, 4], 1.0, &mut r);
    let proj = random_tensor(&[10, 4], 1.0, &mut r);
    // the same seed on every call reproduces the mask
    let run = |x: Tensor<f64>| dropout(x, 0.3, Mode::Train, &mut rng(77)).unwrap();
    let loss = |t: &[Tensor<f64>]| project(&run(t[0].clone()).0, &proj);
    let (_, cache) = run(x.clone());
    let dx = dropout_backward(&cache, proj.clone()).unwrap();
    errs.push(("dropout".to_string(), fd_check(&[x], 0, &dx, loss, None)));
    errs
}

pub fn dense_gradients() -> Errors {
    let mut errs = Errors::new();
    let mut r = rng(6);
    let x = random_tensor(&[5, 4], 1.0, &mut r);
    let w = random_tensor(&[3, 4], 1.0, &mut r);
    let b = random_tensor(&[3], 1.0, &mut r);
    let proj = random_tensor(&[5, 3], 1.0, &mut r);
    let inputs = vec![x, w, b];
    let params = |t: &[Tensor<f64>]| DenseParams { weight: t[1].clone(), bias: t[2].clone() };
    let loss = |t: &[Tensor<f64>]| project(&dense(&params(t), t[0].clone()).unwrap().0, &proj);
    let (_, cache) = dense(&params(&inputs), inputs[0].clone()).unwrap();
    let (dx, g) = dense_backward(&params(&inputs), &cache, &proj, true).unwrap();
    errs.push(("dense input".to_string(), fd_check(&inputs, 0, &dx.unwrap(), loss, None)));
    errs.push(("dense weight".to_string(), fd_check(&inputs, 1, &g.weight, loss, None)));
    errs.push(("dense bias".to_string(), fd_check(&inputs, 2, &g.bias, loss, None)));
    errs
}

fn lstm_inputs(seed: u64, t_len: usize, input: usize, units: usize) -> Vec<Tensor<f64>> {
    let mut r = rng(seed);
    vec![
        random_tensor(&[t_len, input], 1.0, &mut r),
        random_tensor(&[4 * units, input], 0.6, &mut r),
        random_tensor(&[4 * units, units], 0.6, &mut r),
        random_tensor(&[4 * units], 0.5, &mut r),
    ]
}

fn lstm_params(t: &[Tensor<f64>]) -> LstmParams<f64> {
    LstmParams { w_input: t[0].clone(), w_recurrent: t[1].clone(), bias: t[2].clone() }
}

pub fn lstm_gradients_both_directions() -> Errors {
    let mut errs = Errors::new();
    for (seed, dir) in [(7, Direction::Forward), (8, Direction::Reverse)] {
        let inputs = lstm_inputs(seed, 6, 3, 4);
        let proj = random_tensor(&[6, 4], 1.0, &mut rng(seed + 100));
        let loss = |t: &[Tensor<f64>]| project(&lstm_forward(&lstm_params(&t[1..]), &t[0], dir).unwrap().0, &proj);
        let p = lstm_params(&inputs[1..]);
        let (_, cache) = lstm_forward(&p, &inputs[0], dir).unwrap();
        let (dx, g) = lstm_backward(&p, &cache, &proj, true).unwrap();
        let grads = [dx.unwrap(), g.w_input, g.w_recurrent, g.bias];
        for (i, (name, grad)) in ["input", "w_input", "w_recurrent", "bias"].iter().zip(&grads).enumerate() {
            errs.push((format!("lstm {dir:?} {name}"), fd_check(&inputs, i, grad, loss, None)));
        }
    }
    errs
}

pub fn blstm_gradients() -> Errors {
    let mut errs = Errors::new();
    let mut inputs = lstm_inputs(9, 5, 3, 2);
    inputs.extend(lstm_inputs(10, 5, 3, 2).into_iter().skip(1));
    let params = |t: &[Tensor<f64>]| BlstmParams { fwd: lstm_params(&t[1..4]), bwd: lstm_params(&t[4..7]) };
    let proj = random_tensor(&[5, 4], 1.0, &mut rng(11));
    let loss = |t: &[Tensor<f64>]| project(&blstm(&params(t), &t[0]).unwrap().0, &proj);
    let p = params(&inputs);
    let (_, cache) = blstm(&p, &inputs[0]).unwrap();
    let (dx, g) = blstm_backward(&p, &cache, &proj, true).unwrap();
    let grads = [
        dx.unwrap(),
        g.fwd.w_input,
        g.fwd.w_recurrent,
        g.fwd.bias,
        g.bwd.w_input,
        g.bwd.w_recurrent,
        g.bwd.bias,
    ];
    for (i, grad) in grads.iter().enumerate() {
        errs.push((format!("blstm tensor {i}"), fd_check(&inputs, i, grad, loss, None)));
    }
    errs
}

pub fn ctc_gradient() -> Errors {
    let mut errs = Errors::new();
    let mut r = rng(12);
    for case in 0..20 {
        let t_len = r.gen_range(3..10);
        let classes = r.gen_range(2..6);
        let len = r.gen_range(0..=(t_len / 2).min(4));
        let target = LabelSeq((0..len).map(|_| r.gen_range(0..classes - 1)).collect());
        if target.min_frames() > t_len {
            continue;
        }
        let logits = random_tensor(&[t_len, classes], 2.0, &mut r);
        let loss = |t: &[Tensor<f64>]| ctc_forward_backward(&t[0], &target, t_len).unwrap().loss;
        let out = ctc_forward_backward(&logits, &target, t_len).unwrap();
        errs.push((format!("ctc case {case}"), fd_check(&[logits], 0, &out.grad, loss, None)));
    }
    errs
}

pub fn end_to_end_reduced_model() -> Errors {
    let mut errs = Errors::new();
    let alphabet = Alphabet::new("abc ".chars().collect()).unwrap();
    let mut model = Model::<f64>::new(ModelConfig::reduced(4), alphabet.clone(), 21).unwrap();
    // non-zero biases so their gradients are exercised away from init
    let mut r = rng(22);
    for (_, t) in model.params.named_tensors_mut() {
        if t.rank() == 1 {
            t.data_mut().iter_mut().for_each(|v| *v = r.gen_range(-0.1..0.1));
        }
    }
    let samples: Vec<Sample> = [("ab c", 48), ("cab", 40)]
        .iter()
        .enumerate()
        .map(|(i, &(text, w))| {
            let pixels = (0..w * 32).map(|_| r.gen_range(0.0f32..1.0)).collect();
            Sample { id: format!("s{i}"), image: LineImage::new(w, 32, pixels).unwrap(), transcript: text.into() }
        })
        .collect();
    let refs: Vec<&Sample> = samples.iter().collect();
    let batch = Batch::<f64>::from_samples(&refs, &alphabet).unwrap();
    let config = model.config.clone();
    let freeze = FreezeSpec::all();
    let eval = |params: &htr_core::model::Params<f64>| {
        batch_loss_and_grad(params, &config, &batch, &freeze, Mode::Train, 5, 3, Exec::Sequential)
            .unwrap()
    };
    let (_, grads) = eval(&model.params);

    let named: Vec<(String, usize)> = model.params.named_tensors().iter().map(|(n, t)| (n.clone(), t.len())).collect();
    let total: usize = named.iter().map(|(_, n)| n).sum();
    let picks = index::sample(&mut r, total, 50).into_vec();
    for flat in picks {
        let (mut ti, mut i) = (0, flat);
        while i >= named[ti].1 {
            i -= named[ti].1;
            ti += 1;
        }
        let analytic = grads.named_tensors()[ti].1.data()[i];
        let mut probe = model.params.clone();
        let x0 = probe.named_tensors()[ti].1.data()[i];
        probe.named_tensors_mut()[ti].1.data_mut()[i] = x0 + FD_STEP;
        let up = eval(&probe).0;
        probe.named_tensors_mut()[ti].1.data_mut()[i] = x0 - FD_STEP;
        let down = eval(&probe).0;
        let numeric = (up - down) / (2.0 * FD_STEP);
        errs.push((format!("{}[{i}]", named[ti].0), rel_err(analytic, numeric)));
    }
    errs
}
