//! Accuracy and confusion matrices over the four training classes.

use serde::{Deserialize, Serialize};

use crate::NUM_TRAIN_CLASSES;

/// Rows are true classes, columns predicted classes (training-class indices).
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: [[u64; NUM_TRAIN_CLASSES]; NUM_TRAIN_CLASSES],
}

impl ConfusionMatrix {
    pub fn from_pairs(pairs: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut m = ConfusionMatrix::default();
        for (truth, predicted) in pairs {
            m.counts[truth][predicted] += 1;
        }
        m
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..NUM_TRAIN_CLASSES).map(|i| self.counts[i][i]).sum()
    }

    /// `trace / total`; zero for an empty matrix.
    pub fn accuracy(&self) -> f64 {
        match self.total() {
            0 => 0.0,
            t => self.trace() as f64 / t as f64,
        }
    }

    /// Per-class support (row sums).
    pub fn support(&self) -> [u64; NUM_TRAIN_CLASSES] {
        std::array::from_fn(|i| self.counts[i].iter().sum())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub accuracy: f64,
    pub confusion: ConfusionMatrix,
}

impl Evaluation {
    pub fn from_pairs(pairs: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let confusion = ConfusionMatrix::from_pairs(pairs);
        Evaluation {
            accuracy: confusion.accuracy(),
            confusion,
        }
    }
}

/// Training-set loss and accuracy of the parameters kept after an epoch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub loss: f64,
    pub accuracy: f64,
    /// Rate the epoch ran with.
    pub learning_rate: f64,
    /// `false` when the epoch raised the loss and its updates were undone.
    pub accepted: bool,
}

/// Index of the largest entry; the first one on ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}
