//! Ingestion, cleaning, annotation, classification and analytics for
//! hashtag-collected social media posts.
//!
//! The crate is organised the way the data flows:
//!
//! * [`corpus`]: post and annotation records, file ingestion, cleaning and
//!   the deterministic fixture generator.
//! * [`preprocess`]: first-frame extraction, OCR/subtitle/translation merge
//!   and the 300-word caption trim.
//! * [`text_model`]: attention LSTM caption classifier trained from scratch.
//! * [`image_model`]: convolutional image classifier with frozen-prefix
//!   fine-tuning.
//! * [`analytics`]: geographic, per-country, label-overlap and engagement
//!   aggregates plus static report rendering.
//! * [`annotate`]: the labeling queue and store behind the annotation API.

pub mod analytics;
pub mod annotate;
pub mod checkpoint;
pub mod corpus;
mod error;
pub mod image_model;
pub mod media;
pub mod metrics;
pub mod optim;
pub mod preprocess;
pub mod sampling;
pub mod text_model;

pub use corpus::{Annotation, CleanReport, MediaKind, PostRecord, SentimentClass};
pub use error::{Error, Result};
pub use metrics::{ConfusionMatrix, EpochStats, Evaluation};

/// Number of classes the classifiers are trained on (`Random` is excluded).
pub const NUM_TRAIN_CLASSES: usize = 4;
