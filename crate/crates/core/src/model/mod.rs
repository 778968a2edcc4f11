//! Network assembly, parameter accounting, checkpoints, head replacement and
//! freeze specs.

mod checkpoint;
mod config;
mod freeze;
mod network;

pub use checkpoint::{decode_checkpoint, encode_checkpoint, load_checkpoint, peek_config, save_checkpoint, VERSION};
pub use config::{count_parameters, ModelConfig, Profile};
pub use freeze::FreezeSpec;
pub use network::{
    backward_sample, batch_loss_and_grad, forward_sample, image_tensor, Model, Params, SampleCache, Trainer,
};
