//! Line-level handwriting recognition with a CNN-BLSTM-CTC network and
//! layer-freezing transfer learning.
//!
//! The crate covers the full loop: dense tensors and hand-written layer
//! gradients ([`tensor`], [`layers`]), the CTC objective ([`ctc`]), Adam with
//! freeze masks ([`optim`]), the network and its checkpoints ([`model`]),
//! data ingestion and synthetic corpora ([`data`]), CER evaluation
//! ([`metrics`]) and the experiment drivers behind the `htr` binary
//! ([`harness`]).

pub mod ctc;
pub mod data;
pub mod error;
pub mod harness;
pub mod layers;
pub mod metrics;
pub mod model;
pub mod optim;
pub mod par;
pub mod rng;
pub mod scalar;
pub mod tensor;

pub use error::{Error, Result};
pub use scalar::{Precision, Scalar};
pub use tensor::Tensor;
