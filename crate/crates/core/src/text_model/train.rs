use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::network::{accumulate_gradient, forward, forward_trace};
use super::params::{AttentionLstmParams, FrozenLayers, ModelDims};
use crate::metrics::{argmax, EpochStats, Evaluation};
use crate::optim::{BoldDriver, StepControl};
use crate::sampling::interleaved_order;
use crate::{Error, Result, SentimentClass};

/// A tokenized caption with its class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledSequence {
    pub tokens: Vec<usize>,
    pub label: SentimentClass,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub seed: u64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    #[serde(default)]
    pub frozen: FrozenLayers,
    #[serde(default = "default_max_len")]
    pub max_len: usize,
    /// Rescales the batch gradient to at most this global L2 norm.
    #[serde(default = "default_clip_norm")]
    pub clip_norm: Option<f64>,
    /// Per-epoch rate adaptation; `None` keeps the rate fixed.
    #[serde(default = "default_step_control")]
    pub step_control: Option<BoldDriver>,
}

fn default_step_control() -> Option<BoldDriver> {
    Some(BoldDriver::default())
}

fn default_clip_norm() -> Option<f64> {
    Some(1.0)
}

fn default_max_len() -> usize {
    crate::preprocess::MAX_WORDS
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            seed: 0,
            learning_rate: 0.5,
            epochs: 30,
            batch_size: 4,
            frozen: FrozenLayers::None,
            max_len: default_max_len(),
            clip_norm: default_clip_norm(),
            step_control: default_step_control(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "learning_rate must be a non-negative finite number, got {}",
                self.learning_rate
            )));
        }
        if self.clip_norm.is_some_and(|c| c.is_nan() || c <= 0.0) {
            return Err(Error::InvalidArgument("clip_norm must be positive".into()));
        }
        if self.step_control.is_some_and(|r| !r.is_valid()) {
            return Err(Error::InvalidArgument(
                "step_control needs grow >= 1 and 0 < shrink < 1".into(),
            ));
        }
        if self.epochs == 0 || self.batch_size == 0 || self.max_len == 0 {
            return Err(Error::InvalidArgument(
                "epochs, batch_size and max_len must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

fn training_label(class: SentimentClass) -> Result<usize> {
    class.training_index().ok_or_else(|| {
        Error::InvalidArgument(format!(
            "class {} ({}) is not a training class",
            class.code(),
            class.name()
        ))
    })
}

fn prepared(corpus: &[LabeledSequence], max_len: usize) -> Result<Vec<(&[usize], usize)>> {
    if corpus.is_empty() {
        return Err(Error::InvalidArgument("empty training corpus".into()));
    }
    corpus
        .iter()
        .map(|s| Ok((&s.tokens[..s.tokens.len().min(max_len)], training_label(s.label)?)))
        .collect()
}

fn dataset_stats(samples: &[(&[usize], usize)], p: &AttentionLstmParams) -> (f64, f64) {
    let mut loss = 0.0;
    let mut correct = 0usize;
    for (tokens, label) in samples {
        let y = forward(tokens, p);
        loss -= y[*label].ln();
        if argmax(y.as_slice().expect("contiguous")) == *label {
            correct += 1;
        }
    }
    let n = samples.len() as f64;
    (loss / n, correct as f64 / n)
}

/// Minibatch gradient descent on mean cross-entropy.
///
/// Starts from `init` (for fine-tuning) or a fresh seeded initialization
/// with `dims`. Tensors selected by `config.frozen` are never written.
pub fn train(
    corpus: &[LabeledSequence],
    config: &TrainConfig,
    dims: ModelDims,
    init: Option<AttentionLstmParams>,
) -> Result<(AttentionLstmParams, Vec<EpochStats>)> {
    config.validate()?;
    let samples = prepared(corpus, config.max_len)?;
    let mut params = match init {
        Some(p) => p,
        None => AttentionLstmParams::init(dims, config.seed),
    };
    if samples
        .iter()
        .any(|(t, _)| t.iter().any(|&i| i >= params.dims.vocab))
    {
        log::warn!("token indices beyond the vocabulary are read as OOV");
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let labels: Vec<usize> = samples.iter().map(|(_, l)| *l).collect();
    let mut grad = AttentionLstmParams::zeros(params.dims);
    let (loss0, accuracy0) = dataset_stats(&samples, &params);
    let mut control = StepControl::new(config.learning_rate, config.step_control, loss0, accuracy0);
    let mut history = Vec::with_capacity(config.epochs);
    for epoch in 1..=config.epochs {
        let before = params.clone();
        let order = interleaved_order(&labels, &mut rng);
        for (batch, chunk) in order.chunks(config.batch_size).enumerate() {
            for (_, g) in grad.tensors_mut() {
                g.fill(0.0);
            }
            let mut batch_loss = 0.0;
            for &idx in chunk {
                let (tokens, label) = samples[idx];
                let trace = forward_trace(tokens, &params);
                batch_loss += accumulate_gradient(&trace, label, &params, &mut grad);
            }
            let batch_loss = batch_loss / chunk.len() as f64;
            if !batch_loss.is_finite() {
                return Err(Error::NonFiniteLoss {
                    epoch,
                    batch: batch + 1,
                    loss: batch_loss,
                });
            }
            let mut step = control.rate() / chunk.len() as f64;
            if let Some(clip) = config.clip_norm {
                let norm = grad
                    .tensors()
                    .iter()
                    .filter(|(name, _)| !config.frozen.freezes(name))
                    .flat_map(|(_, g)| g.iter())
                    .map(|g| g * g)
                    .sum::<f64>()
                    .sqrt()
                    / chunk.len() as f64;
                if norm > clip {
                    step *= clip / norm;
                }
            }
            for ((name, w), (_, g)) in params.tensors_mut().into_iter().zip(grad.tensors()) {
                if config.frozen.freezes(name) {
                    continue;
                }
                for (w, g) in w.iter_mut().zip(g) {
                    *w -= step * g;
                }
            }
        }
        let (loss, accuracy) = dataset_stats(&samples, &params);
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss {
                epoch,
                batch: 0,
                loss,
            });
        }
        let outcome = control.finish_epoch(loss, accuracy);
        if !outcome.accepted {
            params = before;
        }
        log::debug!(
            "epoch {epoch}: loss {loss:.6} accuracy {accuracy:.4} rate {} kept {}",
            outcome.learning_rate,
            outcome.accepted
        );
        history.push(EpochStats {
            epoch,
            loss: outcome.loss,
            accuracy: outcome.accuracy,
            learning_rate: outcome.learning_rate,
            accepted: outcome.accepted,
        });
    }
    Ok((params, history))
}

/// Accuracy and confusion matrix over a labeled set.
pub fn evaluate(params: &AttentionLstmParams, set: &[LabeledSequence]) -> Result<Evaluation> {
    let samples = prepared(set, usize::MAX)?;
    Ok(Evaluation::from_pairs(samples.iter().map(|(tokens, label)| {
        let y = forward(tokens, params);
        (*label, argmax(y.as_slice().expect("contiguous")))
    })))
}
