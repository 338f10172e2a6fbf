//! Epoch-level step-size control for minibatch gradient descent.

use serde::{Deserialize, Serialize};

/// "Bold driver": after an epoch that lowers the training loss the rate is
/// multiplied by `grow`; after one that raises it the epoch's updates are
/// discarded and the rate is multiplied by `shrink`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoldDriver {
    pub grow: f64,
    pub shrink: f64,
}

impl Default for BoldDriver {
    fn default() -> Self {
        BoldDriver {
            grow: 1.1,
            shrink: 0.5,
        }
    }
}

impl BoldDriver {
    pub fn is_valid(&self) -> bool {
        self.grow >= 1.0 && self.grow.is_finite() && self.shrink > 0.0 && self.shrink < 1.0
    }
}

/// Tracks the current rate and the last accepted training loss.
#[derive(Debug, Clone)]
pub struct StepControl {
    rate: f64,
    rule: Option<BoldDriver>,
    loss: f64,
    accuracy: f64,
}

/// What happened to one epoch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochOutcome {
    pub accepted: bool,
    /// Rate the epoch ran with.
    pub learning_rate: f64,
    /// Loss and accuracy of the parameters kept after the epoch.
    pub loss: f64,
    pub accuracy: f64,
}

impl StepControl {
    pub fn new(rate: f64, rule: Option<BoldDriver>, initial_loss: f64, initial_accuracy: f64) -> Self {
        StepControl {
            rate,
            rule,
            loss: initial_loss,
            accuracy: initial_accuracy,
        }
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    /// Decides whether to keep an epoch that ended at `loss`. The caller must
    /// restore the pre-epoch parameters when the outcome is not accepted.
    pub fn finish_epoch(&mut self, loss: f64, accuracy: f64) -> EpochOutcome {
        let used = self.rate;
        match self.rule {
            Some(rule) if loss > self.loss => {
                self.rate *= rule.shrink;
                EpochOutcome {
                    accepted: false,
                    learning_rate: used,
                    loss: self.loss,
                    accuracy: self.accuracy,
                }
            }
            rule => {
                if let Some(rule) = rule {
                    self.rate *= rule.grow;
                }
                self.loss = loss;
                self.accuracy = accuracy;
                EpochOutcome {
                    accepted: true,
                    learning_rate: used,
                    loss,
                    accuracy,
                }
            }
        }
    }
}
