//! Convolutional image classifier with frozen-prefix fine-tuning.

pub mod conv;
mod data;
pub mod network;
mod spec;
mod train;

pub use conv::{convolve, max_pool};
pub use data::{fit_image, image_to_tensor, load_manifest_images, read_manifest, write_manifest, ManifestEntry};
pub use network::{forward, forward_trace, loss_and_gradient, CnnParams, LayerParams, Trace, CHECKPOINT_KIND};
pub use spec::{Activation, CnnSpec, LayerSpec, Shape};
pub use train::{evaluate, fine_tune, ImageTrainConfig, LabeledImage};
