use ndarray::Array3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::network::{accumulate_gradient, forward, forward_trace, CnnParams};
use super::spec::CnnSpec;
use crate::metrics::{argmax, EpochStats, Evaluation};
use crate::optim::{BoldDriver, StepControl};
use crate::sampling::interleaved_order;
use crate::{Error, Result, SentimentClass};

/// Pixels scaled to `[0, 1]`, laid out `(channels, height, width)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledImage {
    pub pixels: Array3<f64>,
    pub label: SentimentClass,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageTrainConfig {
    pub seed: u64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Per-epoch rate adaptation; `None` keeps the rate fixed.
    #[serde(default = "default_step_control")]
    pub step_control: Option<BoldDriver>,
}

fn default_step_control() -> Option<BoldDriver> {
    Some(BoldDriver::default())
}

impl Default for ImageTrainConfig {
    fn default() -> Self {
        ImageTrainConfig {
            seed: 0,
            learning_rate: 0.03,
            epochs: 10,
            batch_size: 16,
            step_control: default_step_control(),
        }
    }
}

impl ImageTrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "learning_rate must be a non-negative finite number, got {}",
                self.learning_rate
            )));
        }
        if self.step_control.is_some_and(|r| !r.is_valid()) {
            return Err(Error::InvalidArgument(
                "step_control needs grow >= 1 and 0 < shrink < 1".into(),
            ));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::InvalidArgument(
                "epochs and batch_size must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

fn prepared(corpus: &[LabeledImage], spec: &CnnSpec) -> Result<Vec<usize>> {
    if corpus.is_empty() {
        return Err(Error::InvalidArgument("empty image corpus".into()));
    }
    corpus
        .iter()
        .map(|s| {
            if s.pixels.dim() != spec.input {
                return Err(Error::Shape(format!(
                    "image is {:?}, spec expects {:?}",
                    s.pixels.dim(),
                    spec.input
                )));
            }
            s.label.training_index().ok_or_else(|| {
                Error::InvalidArgument(format!("class {} is not a training class", s.label.code()))
            })
        })
        .collect()
}

fn dataset_stats(corpus: &[LabeledImage], labels: &[usize], p: &CnnParams) -> Result<(f64, f64)> {
    let mut loss = 0.0;
    let mut correct = 0usize;
    for (s, &label) in corpus.iter().zip(labels) {
        let y = forward(s.pixels.view(), p)?;
        loss -= y[label].ln();
        if argmax(y.as_slice().expect("contiguous")) == label {
            correct += 1;
        }
    }
    let n = corpus.len() as f64;
    Ok((loss / n, correct as f64 / n))
}

/// Minibatch gradient descent on mean cross-entropy. The first
/// `spec.frozen_prefix` layers are never written.
///
/// `init` must share the architecture of `spec`; without it the weights are
/// freshly initialized from `config.seed`.
pub fn fine_tune(
    corpus: &[LabeledImage],
    spec: &CnnSpec,
    config: &ImageTrainConfig,
    init: Option<CnnParams>,
) -> Result<(CnnParams, Vec<EpochStats>)> {
    config.validate()?;
    spec.validate()?;
    let labels = prepared(corpus, spec)?;
    let mut params = match init {
        Some(p) if p.spec.same_architecture(spec) => p,
        Some(_) => {
            return Err(Error::Shape(
                "initial parameters do not match the spec's architecture".into(),
            ))
        }
        None => CnnParams::init(spec, config.seed)?,
    };
    params.spec.frozen_prefix = spec.frozen_prefix;
    let stop = spec.frozen_prefix;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut grad = CnnParams::zeros(spec)?;
    let (loss0, accuracy0) = dataset_stats(corpus, &labels, &params)?;
    let mut control = StepControl::new(config.learning_rate, config.step_control, loss0, accuracy0);
    let mut history = Vec::with_capacity(config.epochs);
    for epoch in 1..=config.epochs {
        let before = params.clone();
        let order = interleaved_order(&labels, &mut rng);
        for (batch, chunk) in order.chunks(config.batch_size).enumerate() {
            for layer in stop..grad.layers.len() {
                for g in grad.layer_slices_mut(layer) {
                    g.fill(0.0);
                }
            }
            let mut batch_loss = 0.0;
            for &idx in chunk {
                let trace = forward_trace(corpus[idx].pixels.view(), &params)?;
                batch_loss += accumulate_gradient(&trace, labels[idx], &params, &mut grad, stop);
            }
            let batch_loss = batch_loss / chunk.len() as f64;
            if !batch_loss.is_finite() {
                return Err(Error::NonFiniteLoss {
                    epoch,
                    batch: batch + 1,
                    loss: batch_loss,
                });
            }
            let step = control.rate() / chunk.len() as f64;
            for layer in stop..params.layers.len() {
                let grads = grad.layer_slices(layer);
                for (w, g) in params.layer_slices_mut(layer).into_iter().zip(grads) {
                    for (w, g) in w.iter_mut().zip(g) {
                        *w -= step * g;
                    }
                }
            }
        }
        let (loss, accuracy) = dataset_stats(corpus, &labels, &params)?;
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
pub fn evaluate(params: &CnnParams, set: &[LabeledImage]) -> Result<Evaluation> {
    let labels = prepared(set, &params.spec)?;
    let mut pairs = Vec::with_capacity(set.len());
    for (s, label) in set.iter().zip(labels) {
        let y = forward(s.pixels.view(), params)?;
        pairs.push((label, argmax(y.as_slice().expect("contiguous"))));
    }
    Ok(Evaluation::from_pairs(pairs))
}
