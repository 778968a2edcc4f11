use rand::seq::SliceRandom;
use rand::Rng;

use crate::ctc::LabelSeq;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

use super::{Alphabet, Sample};

/// Width-padded group of preprocessed samples.
#[derive(Clone, Debug)]
pub struct Batch<F = f64> {
    /// `[B, W_max, H, 1]`, padding is background (zero).
    pub images: Tensor<F>,
    pub widths: Vec<usize>,
    pub targets: Vec<LabelSeq>,
    pub ids: Vec<String>,
}

impl<F: Scalar> Batch<F> {
    pub fn from_samples(samples: &[&Sample], alphabet: &Alphabet) -> Result<Self> {
        let first = samples.first().ok_or_else(|| Error::Invalid("empty batch".into()))?;
        let height = first.image.height();
        let w_max = samples.iter().map(|s| s.image.width()).max().unwrap_or(1);
        let mut images = Tensor::zeros(&[samples.len(), w_max, height, 1])?;
        let stride = w_max * height;
        let mut targets = Vec::with_capacity(samples.len());
        for (b, s) in samples.iter().enumerate() {
            if s.image.height() != height {
                return Err(Error::shape(format!(
                    "sample {} has height {}, batch height is {height}",
                    s.id,
                    s.image.height()
                )));
            }
            let dst = &mut images.data_mut()[b * stride..b * stride + s.image.pixels().len()];
            for (d, &p) in dst.iter_mut().zip(s.image.pixels()) {
                *d = F::of(f64::from(p));
            }
            targets.push(alphabet.encode(&s.transcript, &s.id)?);
        }
        Ok(Batch {
            images,
            widths: samples.iter().map(|s| s.image.width()).collect(),
            targets,
            ids: samples.iter().map(|s| s.id.clone()).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.widths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.widths.is_empty()
    }

    pub fn height(&self) -> usize {
        self.images.shape()[2]
    }

    /// Unpadded `[width, H, 1]` image of sample `b`.
    pub fn image(&self, b: usize) -> Result<Tensor<F>> {
        let [_, w_max, h, _] = self.images.shape()[..] else {
            return Err(Error::shape("batch images must be rank 4"));
        };
        let w = self.widths[b];
        let start = b * w_max * h;
        Tensor::from_vec(&[w, h, 1], self.images.data()[start..start + w * h].to_vec())
    }
}

/// Shuffle with `rng`, split into groups of `batch_size` (last one may be
/// short) and encode every transcript.
pub fn make_batches<F: Scalar, R: Rng + ?Sized>(
    samples: &[Sample],
    alphabet: &Alphabet,
    batch_size: usize,
    rng: &mut R,
) -> Result<Vec<Batch<F>>> {
    if batch_size == 0 {
        return Err(Error::Config("batch size must be positive".into()));
    }
    let mut order: Vec<usize> = (0..samples.len()).collect();
    order.shuffle(rng);
    order
        .chunks(batch_size)
        .map(|idx| {
            let group: Vec<&Sample> = idx.iter().map(|&i| &samples[i]).collect();
            Batch::from_samples(&group, alphabet)
        })
        .collect()
}
