//! Attention LSTM caption classifier.

mod data;
pub mod network;
mod params;
mod train;
mod vocab;

pub use data::{encode_all, parse_labeled_text, read_labeled_text, write_labeled_text, LabeledText};
pub use network::{attention, forward, forward_trace, loss, loss_and_gradient, softmax, Attention, Trace};
pub use params::{AttentionLstmParams, FrozenLayers, ModelDims, CHECKPOINT_KIND, INIT_SCALE, TENSOR_NAMES};
pub use train::{evaluate, train, LabeledSequence, TrainConfig};
pub use vocab::{normalize, Vocabulary, OOV, PAD};

/// Index sequence for `text`: normalized, OOV-mapped, truncated to `max_len`.
pub fn tokenize(text: &str, vocab: &Vocabulary, max_len: usize) -> Vec<usize> {
    vocab.encode(text, max_len)
}
