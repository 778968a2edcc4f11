//! The CNN-BLSTM-CTC network: parameters, per-sample forward/backward and
//! batched training.
//!
//! Per sample the pipeline is
//!
//! ```text
//! [W,H,1] -> (conv -> leaky relu -> [pool] -> [dropout]) x N_conv
//!         -> collapse columns -> (blstm -> dropout) x N_lstm -> fc -> logits [W/8, L+1]
//! ```
//!
//! Each sample runs on its own unpadded width, so a sample's output does not
//! depend on which batch it lands in.

use crate::ctc::{ctc_forward_backward, greedy_decode};
use crate::data::{Alphabet, Batch, LineImage};
use crate::error::{Error, Result};
use crate::layers::{
    blstm, blstm_backward, collapse_columns, conv2d, conv2d_backward, dense, dense_backward, dropout,
    dropout_backward, expand_columns, leaky_relu, leaky_relu_backward, maxpool2x2, maxpool2x2_backward,
    BlstmCache, BlstmParams, ConvCache, ConvParams, DenseCache, DenseParams, DropoutCache, LeakyCache, Mode,
    PoolCache,
};
use crate::optim::{AdamHyper, AdamState, ParamSet};
use crate::par::Exec;
use crate::rng::{mix, stream, RunRng, Stream};
use crate::scalar::Scalar;
use crate::tensor::{log_softmax_in_place, Tensor};

use super::{FreezeSpec, ModelConfig};

/// Samples per gradient-accumulation chunk. Fixed so the floating-point
/// summation order never depends on the thread count.
const GRAD_CHUNK: usize = 2;

#[derive(Clone, Debug, PartialEq)]
pub struct Params<F = f64> {
    pub conv: Vec<ConvParams<F>>,
    pub blstm: Vec<BlstmParams<F>>,
    pub fc: DenseParams<F>,
}

impl<F: Scalar> Params<F> {
    pub fn zeros_like(&self) -> Self {
        Params {
            conv: self.conv.iter().map(ConvParams::zeros_like).collect(),
            blstm: self.blstm.iter().map(BlstmParams::zeros_like).collect(),
            fc: self.fc.zeros_like(),
        }
    }

    pub fn add_assign(&mut self, other: &Self) -> Result<()> {
        for ((_, a), (_, b)) in self.named_tensors_mut().into_iter().zip(other.named_tensors()) {
            a.add_assign(b)?;
        }
        Ok(())
    }

    pub fn scale(&mut self, s: F) {
        for (_, t) in self.named_tensors_mut() {
            t.scale_in_place(s);
        }
    }

    pub fn total_len(&self) -> usize {
        self.named_tensors().iter().map(|(_, t)| t.len()).sum()
    }
}

impl<F: Scalar> ParamSet<F> for Params<F> {
    fn named_tensors(&self) -> Vec<(String, &Tensor<F>)> {
        let mut v = Vec::new();
        for (i, c) in self.conv.iter().enumerate() {
            v.push((format!("conv{}.kernel", i + 1), &c.kernel));
            v.push((format!("conv{}.bias", i + 1), &c.bias));
        }
        for (i, b) in self.blstm.iter().enumerate() {
            for (dir, p) in [("fwd", &b.fwd), ("bwd", &b.bwd)] {
                v.push((format!("blstm{}.{dir}.w_input", i + 1), &p.w_input));
                v.push((format!("blstm{}.{dir}.w_recurrent", i + 1), &p.w_recurrent));
                v.push((format!("blstm{}.{dir}.bias", i + 1), &p.bias));
            }
        }
        v.push(("fc.weight".into(), &self.fc.weight));
        v.push(("fc.bias".into(), &self.fc.bias));
        v
    }

    fn named_tensors_mut(&mut self) -> Vec<(String, &mut Tensor<F>)> {
        let mut v = Vec::new();
        for (i, c) in self.conv.iter_mut().enumerate() {
            v.push((format!("conv{}.kernel", i + 1), &mut c.kernel));
            v.push((format!("conv{}.bias", i + 1), &mut c.bias));
        }
        for (i, b) in self.blstm.iter_mut().enumerate() {
            for (dir, p) in [("fwd", &mut b.fwd), ("bwd", &mut b.bwd)] {
                v.push((format!("blstm{}.{dir}.w_input", i + 1), &mut p.w_input));
                v.push((format!("blstm{}.{dir}.w_recurrent", i + 1), &mut p.w_recurrent));
                v.push((format!("blstm{}.{dir}.bias", i + 1), &mut p.bias));
            }
        }
        v.push(("fc.weight".into(), &mut self.fc.weight));
        v.push(("fc.bias".into(), &mut self.fc.bias));
        v
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Model<F = f64> {
    pub config: ModelConfig,
    pub alphabet: Alphabet,
    pub params: Params<F>,
}

/// Initialization stream for layer `index` in network order.
fn init_rng(seed: u64, index: usize) -> RunRng {
    stream(seed, Stream::Init, index as u64)
}

impl<F: Scalar> Model<F> {
    /// Glorot-uniform weights, zero biases; layer `k` draws from its own
    /// seeded stream.
    pub fn new(mut config: ModelConfig, alphabet: Alphabet, seed: u64) -> Result<Self> {
        if alphabet.is_empty() {
            return Err(Error::Config("alphabet is empty".into()));
        }
        config.alphabet_size = alphabet.len();
        config.precision = F::PRECISION;
        config.validate()?;
        let mut conv = Vec::new();
        let mut c_in = 1;
        for (i, &c_out) in config.conv_filters.iter().enumerate() {
            conv.push(ConvParams::init(c_in, c_out, &mut init_rng(seed, i))?);
            c_in = c_out;
        }
        let mut blstm_layers = Vec::new();
        let mut input = config.sequence_features();
        for j in 0..config.lstm_layers {
            let k = conv.len() + j;
            blstm_layers.push(BlstmParams::init(input, config.lstm_units, &mut init_rng(seed, k))?);
            input = 2 * config.lstm_units;
        }
        let fc = DenseParams::init(input, config.classes(), &mut init_rng(seed, Self::fc_index(&config)))?;
        Ok(Model {
            config,
            alphabet,
            params: Params {
                conv,
                blstm: blstm_layers,
                fc,
            },
        })
    }

    fn fc_index(config: &ModelConfig) -> usize {
        config.conv_filters.len() + config.lstm_layers
    }

    pub fn parameter_count(&self) -> usize {
        self.params.total_len()
    }

    /// Replace the output layer for `alphabet`, keeping every other tensor.
    pub fn swap_head(&self, alphabet: Alphabet, seed: u64) -> Result<Self> {
        if alphabet.is_empty() {
            return Err(Error::Config("alphabet is empty".into()));
        }
        let mut config = self.config.clone();
        config.alphabet_size = alphabet.len();
        let features = self.params.fc.features();
        let fc = DenseParams::init(features, config.classes(), &mut init_rng(seed, Self::fc_index(&config)))?;
        Ok(Model {
            config,
            alphabet,
            params: Params {
                conv: self.params.conv.clone(),
                blstm: self.params.blstm.clone(),
                fc,
            },
        })
    }

    /// Log-probabilities `[B, T_max, L+1]` for a batch plus per-sample
    /// sequence lengths. Rows past a sample's length hold the uniform
    /// distribution.
    pub fn forward(&self, batch: &Batch<F>, mode: Mode, seed: u64, exec: Exec) -> Result<(Tensor<F>, Vec<usize>)> {
        if batch.is_empty() {
            return Err(Error::Invalid("empty batch".into()));
        }
        if batch.height() != self.config.input_height {
            return Err(Error::shape(format!(
                "batch height {} but model expects {}",
                batch.height(),
                self.config.input_height
            )));
        }
        let idx: Vec<usize> = (0..batch.len()).collect();
        let outs = exec.map(&idx, |_, &b| -> Result<Tensor<F>> {
            let mut rng = stream(seed, Stream::Dropout, b as u64);
            let (logits, _) = forward_sample(&self.params, &self.config, batch.image(b)?, mode, &mut rng)?;
            Ok(logits)
        });
        let outs = outs.into_iter().collect::<Result<Vec<_>>>()?;
        let lens: Vec<usize> = outs.iter().map(|o| o.shape()[0]).collect();
        let t_max = lens.iter().copied().max().unwrap_or(1);
        let classes = self.config.classes();
        let uniform = -F::of(classes as f64).ln();
        let mut out = Tensor::full(&[batch.len(), t_max, classes], uniform)?;
        for (b, logits) in outs.into_iter().enumerate() {
            let dst = &mut out.data_mut()[b * t_max * classes..];
            for t in 0..logits.shape()[0] {
                let row = &mut dst[t * classes..(t + 1) * classes];
                row.copy_from_slice(logits.row(t));
                log_softmax_in_place(row);
            }
        }
        Ok((out, lens))
    }

    /// Greedy transcription of preprocessed images.
    pub fn transcribe(&self, images: &[&LineImage], exec: Exec) -> Result<Vec<String>> {
        let outs = exec.map(images, |_, img| -> Result<String> {
            if img.height() != self.config.input_height {
                return Err(Error::shape(format!(
                    "image height {} but model expects {}",
                    img.height(),
                    self.config.input_height
                )));
            }
            let mut rng = stream(0, Stream::Dropout, 0);
            let (logits, _) = forward_sample(&self.params, &self.config, image_tensor(img)?, Mode::Infer, &mut rng)?;
            let t = logits.shape()[0];
            Ok(self.alphabet.decode(&greedy_decode(&logits, t)))
        });
        outs.into_iter().collect()
    }
}

pub fn image_tensor<F: Scalar>(img: &LineImage) -> Result<Tensor<F>> {
    Tensor::from_vec(
        &[img.width(), img.height(), 1],
        img.pixels().iter().map(|&v| F::of(f64::from(v))).collect(),
    )
}

struct ConvStage<F> {
    conv: ConvCache<F>,
    act: LeakyCache<F>,
    pool: Option<PoolCache>,
    drop: Option<DropoutCache<F>>,
}

struct LstmStage<F> {
    blstm: BlstmCache<F>,
    drop: DropoutCache<F>,
}

/// Everything backward needs from one sample's forward pass.
pub struct SampleCache<F> {
    conv: Vec<ConvStage<F>>,
    map_shape: [usize; 3],
    lstm: Vec<LstmStage<F>>,
    fc: DenseCache<F>,
}

/// Logits `[T, L+1]` of one `[W, H, 1]` image.
pub fn forward_sample<F: Scalar>(
    params: &Params<F>,
    config: &ModelConfig,
    image: Tensor<F>,
    mode: Mode,
    rng: &mut RunRng,
) -> Result<(Tensor<F>, SampleCache<F>)> {
    match *image.shape() {
        [w, h, 1] if h == config.input_height => {
            if config.sequence_len(w) == 0 {
                return Err(Error::shape(format!(
                    "image width {w} too narrow, need at least {}",
                    config.downsampling()
                )));
            }
        }
        _ => {
            return Err(Error::shape(format!(
                "image must be [W,{},1], got {:?}",
                config.input_height,
                image.shape()
            )))
        }
    }
    let slope = F::of(config.leaky_slope);
    let mut x = image;
    let mut conv_caches = Vec::with_capacity(params.conv.len());
    for (i, p) in params.conv.iter().enumerate() {
        let (y, conv) = conv2d(p, x)?;
        let (mut y, act) = leaky_relu(y, slope);
        let pool = if config.conv_pools(i) {
            let (pooled, pc) = maxpool2x2(&y)?;
            y = pooled;
            Some(pc)
        } else {
            None
        };
        let drop = if i > 0 {
            let (d, dc) = dropout(y, config.dropout_cnn, mode, rng)?;
            y = d;
            Some(dc)
        } else {
            None
        };
        conv_caches.push(ConvStage { conv, act, pool, drop });
        x = y;
    }
    let map_shape: [usize; 3] = x.shape().try_into().expect("rank 3");
    let mut seq = collapse_columns(x)?;
    let mut lstm_caches = Vec::with_capacity(params.blstm.len());
    for p in &params.blstm {
        let (y, bc) = blstm(p, &seq)?;
        let (y, dc) = dropout(y, config.dropout_lstm, mode, rng)?;
        lstm_caches.push(LstmStage { blstm: bc, drop: dc });
        seq = y;
    }
    let (logits, fc) = dense(&params.fc, seq)?;
    Ok((
        logits,
        SampleCache {
            conv: conv_caches,
            map_shape,
            lstm: lstm_caches,
            fc,
        },
    ))
}

/// Index in network order of the lowest layer that trains.
fn lowest_trainable(config: &ModelConfig, freeze: &FreezeSpec) -> Option<usize> {
    config.layer_names().iter().position(|n| freeze.is_trainable(n))
}

/// Parameter gradients of one sample given `d loss / d logits`. Layers below
/// the lowest trainable one are skipped and keep zero gradients.
pub fn backward_sample<F: Scalar>(
    params: &Params<F>,
    config: &ModelConfig,
    cache: &SampleCache<F>,
    dlogits: &Tensor<F>,
    freeze: &FreezeSpec,
) -> Result<Params<F>> {
    let mut grads = params.zeros_like();
    let Some(lowest) = lowest_trainable(config, freeze) else {
        return Ok(grads);
    };
    let n_conv = params.conv.len();
    let fc_index = n_conv + params.blstm.len();

    let (dx, g) = dense_backward(&params.fc, &cache.fc, dlogits, lowest < fc_index)?;
    grads.fc = g;
    let Some(mut d) = dx else { return Ok(grads) };

    for j in (0..params.blstm.len()).rev() {
        let stage = &cache.lstm[j];
        d = dropout_backward(&stage.drop, d)?;
        let (dx, g) = blstm_backward(&params.blstm[j], &stage.blstm, &d, lowest < n_conv + j)?;
        grads.blstm[j] = g;
        match dx {
            Some(dx) => d = dx,
            None => return Ok(grads),
        }
    }

    let [_, h, depth] = cache.map_shape;
    let mut d = expand_columns(d, h, depth)?;
    for i in (0..n_conv).rev() {
        let stage = &cache.conv[i];
        if let Some(dc) = &stage.drop {
            d = dropout_backward(dc, d)?;
        }
        if let Some(pc) = &stage.pool {
            d = maxpool2x2_backward(pc, &d)?;
        }
        d = leaky_relu_backward(&stage.act, &d)?;
        let (dx, g) = conv2d_backward(&params.conv[i], &stage.conv, &d, lowest < i)?;
        grads.conv[i] = g;
        match dx {
            Some(dx) => d = dx,
            None => break,
        }
    }
    Ok(grads)
}

/// Mean CTC loss of a batch and the gradient of that mean.
///
/// Sample `b` draws dropout masks from the stream keyed by `(seed, step, b)`.
#[allow(clippy::too_many_arguments)]
pub fn batch_loss_and_grad<F: Scalar>(
    params: &Params<F>,
    config: &ModelConfig,
    batch: &Batch<F>,
    freeze: &FreezeSpec,
    mode: Mode,
    seed: u64,
    step: u64,
    exec: Exec,
) -> Result<(F, Params<F>)> {
    if batch.is_empty() {
        return Err(Error::Invalid("empty batch".into()));
    }
    let idx: Vec<usize> = (0..batch.len()).collect();
    let partial = exec.map_chunks(&idx, GRAD_CHUNK, |_, chunk| -> Result<(F, Params<F>)> {
        let mut loss = F::zero();
        let mut acc: Option<Params<F>> = None;
        for &b in chunk {
            let mut rng = stream(seed, Stream::Dropout, mix(&[step, b as u64]));
            let id = &batch.ids[b];
            let (logits, cache) =
                forward_sample(params, config, batch.image(b)?, mode, &mut rng).map_err(|e| e.in_sample(id))?;
            let t = logits.shape()[0];
            let out = ctc_forward_backward(&logits, &batch.targets[b], t).map_err(|e| e.in_sample(id))?;
            let g = backward_sample(params, config, &cache, &out.grad, freeze)?;
            loss += out.loss;
            match acc.as_mut() {
                Some(a) => a.add_assign(&g)?,
                None => acc = Some(g),
            }
        }
        Ok((loss, acc.expect("chunks are non-empty")))
    });
    let mut loss = F::zero();
    let mut total: Option<Params<F>> = None;
    for r in partial {
        let (l, g) = r?;
        loss += l;
        match total.as_mut() {
            Some(t) => t.add_assign(&g)?,
            None => total = Some(g),
        }
    }
    let mut grads = total.expect("batch is non-empty");
    let inv = F::one() / F::of(batch.len() as f64);
    grads.scale(inv);
    Ok((loss * inv, grads))
}

/// Model plus optimizer state under a freeze mask.
pub struct Trainer<F: Scalar = f64> {
    pub model: Model<F>,
    pub adam: AdamState<F>,
    pub freeze: FreezeSpec,
    pub seed: u64,
    pub exec: Exec,
}

impl<F: Scalar> Trainer<F> {
    pub fn new(model: Model<F>, hyper: AdamHyper, freeze: FreezeSpec, seed: u64) -> Result<Self> {
        freeze.validate_for(&model.config)?;
        let adam = AdamState::new(&model.params, hyper)?;
        Ok(Trainer {
            model,
            adam,
            freeze,
            seed,
            exec: Exec::default(),
        })
    }

    /// One Adam update on the mean batch loss; returns that loss.
    pub fn train_step(&mut self, batch: &Batch<F>) -> Result<F> {
        let (loss, grads) = batch_loss_and_grad(
            &self.model.params,
            &self.model.config,
            batch,
            &self.freeze,
            Mode::Train,
            self.seed,
            self.adam.step,
            self.exec,
        )?;
        self.adam.step(&mut self.model.params, &grads, &self.freeze)?;
        Ok(loss)
    }
}
