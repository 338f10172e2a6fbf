use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::checkpoint::Checkpoint;
use crate::{Error, Result};

pub const CHECKPOINT_KIND: &str = "attention-lstm";

/// Half-width of the uniform weight initialization.
pub const INIT_SCALE: f64 = 0.08;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelDims {
    pub vocab: usize,
    /// Word embedding width.
    pub embed: usize,
    /// LSTM hidden width.
    pub hidden: usize,
    /// Aspect embedding width.
    pub aspect: usize,
    pub classes: usize,
}

impl ModelDims {
    /// Aspect width defaults to the hidden width.
    pub fn new(vocab: usize, embed: usize, hidden: usize) -> Self {
        ModelDims {
            vocab,
            embed,
            hidden,
            aspect: hidden,
            classes: crate::NUM_TRAIN_CLASSES,
        }
    }

    pub fn lstm_input_width(&self) -> usize {
        self.embed + self.aspect
    }
}

/// Every learnable tensor of the attention LSTM.
///
/// LSTM gate rows are stacked `[input; forget; output; candidate]`, each
/// `hidden` rows tall. The step input is the word embedding followed by the
/// aspect vector.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionLstmParams {
    pub dims: ModelDims,
    /// `vocab x embed`
    pub embedding: Array2<f64>,
    /// `4·hidden x (embed + aspect)`
    pub lstm_input: Array2<f64>,
    /// `4·hidden x hidden`
    pub lstm_hidden: Array2<f64>,
    /// `4·hidden`
    pub lstm_bias: Array1<f64>,
    /// Aspect embedding `v_a`.
    pub aspect: Array1<f64>,
    /// `W_h`, `hidden x hidden`
    pub w_h: Array2<f64>,
    /// `W_v`, `aspect x aspect`
    pub w_v: Array2<f64>,
    /// Attention scoring vector `w`, `hidden + aspect`
    pub w: Array1<f64>,
    /// `W_p`, `hidden x hidden`
    pub w_p: Array2<f64>,
    /// `W_x`, `hidden x hidden`
    pub w_x: Array2<f64>,
    /// `W_s`, `classes x hidden`
    pub w_s: Array2<f64>,
    /// `b_s`, `classes`
    pub b_s: Array1<f64>,
}

/// Checkpoint names, in storage order.
pub const TENSOR_NAMES: [&str; 12] = [
    "embedding",
    "lstm.input",
    "lstm.hidden",
    "lstm.bias",
    "aspect",
    "attention.w_h",
    "attention.w_v",
    "attention.w",
    "projection.w_p",
    "projection.w_x",
    "output.w_s",
    "output.b_s",
];

impl AttentionLstmParams {
    pub fn zeros(dims: ModelDims) -> Self {
        let (v, e, d, a, c) = (dims.vocab, dims.embed, dims.hidden, dims.aspect, dims.classes);
        AttentionLstmParams {
            dims,
            embedding: Array2::zeros((v, e)),
            lstm_input: Array2::zeros((4 * d, e + a)),
            lstm_hidden: Array2::zeros((4 * d, d)),
            lstm_bias: Array1::zeros(4 * d),
            aspect: Array1::zeros(a),
            w_h: Array2::zeros((d, d)),
            w_v: Array2::zeros((a, a)),
            w: Array1::zeros(d + a),
            w_p: Array2::zeros((d, d)),
            w_x: Array2::zeros((d, d)),
            w_s: Array2::zeros((c, d)),
            b_s: Array1::zeros(c),
        }
    }

    /// Uniform(-0.08, 0.08) weights, zero biases.
    pub fn init(dims: ModelDims, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = Self::zeros(dims);
        for (name, values) in p.tensors_mut() {
            if name == "lstm.bias" || name == "output.b_s" {
                continue;
            }
            for v in values.iter_mut() {
                *v = rng.random_range(-INIT_SCALE..INIT_SCALE);
            }
        }
        p
    }

    fn shapes(&self) -> [Vec<usize>; 12] {
        [
            self.embedding.shape().to_vec(),
            self.lstm_input.shape().to_vec(),
            self.lstm_hidden.shape().to_vec(),
            self.lstm_bias.shape().to_vec(),
            self.aspect.shape().to_vec(),
            self.w_h.shape().to_vec(),
            self.w_v.shape().to_vec(),
            self.w.shape().to_vec(),
            self.w_p.shape().to_vec(),
            self.w_x.shape().to_vec(),
            self.w_s.shape().to_vec(),
            self.b_s.shape().to_vec(),
        ]
    }

    /// `(name, row-major values)` for every tensor.
    pub fn tensors(&self) -> [(&'static str, &[f64]); 12] {
        fn s(a: Option<&[f64]>) -> &[f64] {
            a.expect("parameters are kept in standard layout")
        }
        [
            (TENSOR_NAMES[0], s(self.embedding.as_slice())),
            (TENSOR_NAMES[1], s(self.lstm_input.as_slice())),
            (TENSOR_NAMES[2], s(self.lstm_hidden.as_slice())),
            (TENSOR_NAMES[3], s(self.lstm_bias.as_slice())),
            (TENSOR_NAMES[4], s(self.aspect.as_slice())),
            (TENSOR_NAMES[5], s(self.w_h.as_slice())),
            (TENSOR_NAMES[6], s(self.w_v.as_slice())),
            (TENSOR_NAMES[7], s(self.w.as_slice())),
            (TENSOR_NAMES[8], s(self.w_p.as_slice())),
            (TENSOR_NAMES[9], s(self.w_x.as_slice())),
            (TENSOR_NAMES[10], s(self.w_s.as_slice())),
            (TENSOR_NAMES[11], s(self.b_s.as_slice())),
        ]
    }

    pub fn tensors_mut(&mut self) -> [(&'static str, &mut [f64]); 12] {
        let AttentionLstmParams {
            embedding,
            lstm_input,
            lstm_hidden,
            lstm_bias,
            aspect,
            w_h,
            w_v,
            w,
            w_p,
            w_x,
            w_s,
            b_s,
            ..
        } = self;
        fn s(a: Option<&mut [f64]>) -> &mut [f64] {
            a.expect("parameters are kept in standard layout")
        }
        [
            (TENSOR_NAMES[0], s(embedding.as_slice_mut())),
            (TENSOR_NAMES[1], s(lstm_input.as_slice_mut())),
            (TENSOR_NAMES[2], s(lstm_hidden.as_slice_mut())),
            (TENSOR_NAMES[3], s(lstm_bias.as_slice_mut())),
            (TENSOR_NAMES[4], s(aspect.as_slice_mut())),
            (TENSOR_NAMES[5], s(w_h.as_slice_mut())),
            (TENSOR_NAMES[6], s(w_v.as_slice_mut())),
            (TENSOR_NAMES[7], s(w.as_slice_mut())),
            (TENSOR_NAMES[8], s(w_p.as_slice_mut())),
            (TENSOR_NAMES[9], s(w_x.as_slice_mut())),
            (TENSOR_NAMES[10], s(w_s.as_slice_mut())),
            (TENSOR_NAMES[11], s(b_s.as_slice_mut())),
        ]
    }

    pub fn tensor(&self, name: &str) -> Option<&[f64]> {
        self.tensors().into_iter().find(|(n, _)| *n == name).map(|(_, v)| v)
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|(_, v)| v.iter().all(|x| x.is_finite()))
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let mut ck = Checkpoint::new(CHECKPOINT_KIND);
        ck.metadata.push((
            "dims".into(),
            serde_json::to_string(&self.dims).expect("dims serialize"),
        ));
        for ((name, values), shape) in self.tensors().into_iter().zip(self.shapes()) {
            ck.push(name, &shape, values);
        }
        ck
    }

    /// Loads parameters, rejecting any tensor whose shape disagrees with the
    /// stored dimensions (or with `expected`, when given).
    pub fn from_checkpoint(ck: &Checkpoint, expected: Option<ModelDims>) -> Result<Self> {
        ck.expect_kind(CHECKPOINT_KIND)?;
        let stored: ModelDims = serde_json::from_str(
            ck.meta("dims")
                .ok_or_else(|| Error::Checkpoint("missing dims metadata".into()))?,
        )?;
        if let Some(exp) = expected {
            if exp != stored {
                return Err(Error::Shape(format!(
                    "checkpoint dims {stored:?} differ from expected {exp:?}"
                )));
            }
        }
        let mut p = Self::zeros(stored);
        let shapes = p.shapes();
        for ((name, dst), shape) in p.tensors_mut().into_iter().zip(shapes) {
            dst.copy_from_slice(&ck.tensor(name, &shape)?.values);
        }
        if !p.is_finite() {
            return Err(Error::Checkpoint("non-finite parameter values".into()));
        }
        Ok(p)
    }
}

/// Tensor groups held fixed during fine-tuning.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FrozenLayers {
    #[default]
    None,
    Embeddings,
    #[serde(rename = "embeddings+lstm")]
    EmbeddingsLstm,
}

impl FrozenLayers {
    pub fn freezes(self, tensor: &str) -> bool {
        match self {
            FrozenLayers::None => false,
            FrozenLayers::Embeddings => tensor == "embedding",
            FrozenLayers::EmbeddingsLstm => tensor == "embedding" || tensor.starts_with("lstm."),
        }
    }
}

impl std::str::FromStr for FrozenLayers {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "none" => Ok(FrozenLayers::None),
            "embeddings" => Ok(FrozenLayers::Embeddings),
            "embeddings+lstm" => Ok(FrozenLayers::EmbeddingsLstm),
            other => Err(format!(
                "unknown frozen set {other:?} (expected none, embeddings, embeddings+lstm)"
            )),
        }
    }
}
