//! Line-image datasets: manifests, alphabets, preprocessing, batching,
//! augmentation and the synthetic corpus generator.

mod alphabet;
mod augment;
mod batch;
mod image;
pub mod manifest;
mod preprocess;
pub mod synth;

pub use alphabet::Alphabet;
pub use augment::{augment, AugmentParams, AugmentRanges, Morphology};
pub use batch::{make_batches, Batch};
pub use image::LineImage;
pub use manifest::{load_dataset, load_manifest, parse_manifest, write_manifest, ManifestEntry};
pub use preprocess::{preprocess, resize_bilinear};
pub use synth::{render_line, synth_generate, DomainFiles, DomainSpec, Style, SynthSpec};

/// A line image with its transcript. `id` is the image path for manifest
/// data.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub id: String,
    pub image: LineImage,
    pub transcript: String,
}
