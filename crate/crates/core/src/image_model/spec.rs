use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Relu,
    Tanh,
    Identity,
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Tanh => x.tanh(),
            Activation::Identity => x,
        }
    }

    /// Derivative expressed through the activation's output.
    pub fn derivative_at_output(self, y: f64) -> f64 {
        match self {
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - y * y,
            Activation::Identity => 1.0,
        }
    }
}

fn one() -> usize {
    1
}

/// One layer of a [`CnnSpec`]. Kernels are `(height, width)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerSpec {
    /// Valid cross-correlation followed by the activation.
    Conv {
        kernel: (usize, usize),
        maps_in: usize,
        maps_out: usize,
        #[serde(default = "one")]
        stride: usize,
        #[serde(default)]
        activation: Activation,
    },
    /// Max pooling.
    Pool { kernel: (usize, usize), stride: usize },
    /// `x + act(conv(x))` with zero padding so the shape is kept; the kernel
    /// must be odd-sized.
    ResidualBlock {
        kernel: (usize, usize),
        maps: usize,
        #[serde(default)]
        activation: Activation,
    },
    Flatten,
    Dense {
        inputs: usize,
        outputs: usize,
        #[serde(default = "identity")]
        activation: Activation,
    },
}

fn identity() -> Activation {
    Activation::Identity
}

impl LayerSpec {
    pub fn has_params(&self) -> bool {
        !matches!(self, LayerSpec::Pool { .. } | LayerSpec::Flatten)
    }
}

/// Shape of the value flowing between layers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shape {
    /// `(channels, height, width)`
    Maps(usize, usize, usize),
    Flat(usize),
}

impl Shape {
    pub fn len(&self) -> usize {
        match *self {
            Shape::Maps(c, h, w) => c * h * w,
            Shape::Flat(n) => n,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CnnSpec {
    /// `(channels, height, width)`
    pub input: (usize, usize, usize),
    pub layers: Vec<LayerSpec>,
    /// Number of leading layers held fixed during fine-tuning.
    #[serde(default)]
    pub frozen_prefix: usize,
    #[serde(default = "num_classes")]
    pub num_classes: usize,
}

fn num_classes() -> usize {
    crate::NUM_TRAIN_CLASSES
}

fn sliding(len: usize, kernel: usize, stride: usize) -> Option<usize> {
    (kernel >= 1 && stride >= 1 && len >= kernel).then(|| (len - kernel) / stride + 1)
}

impl CnnSpec {
    /// 32×32 RGB → conv 3×3 (8) → conv 3×3 (16) → max-pool 2 → dense 4.
    pub fn desk() -> Self {
        CnnSpec {
            input: (3, 32, 32),
            layers: vec![
                LayerSpec::Conv {
                    kernel: (3, 3),
                    maps_in: 3,
                    maps_out: 8,
                    stride: 1,
                    activation: Activation::Relu,
                },
                LayerSpec::Conv {
                    kernel: (3, 3),
                    maps_in: 8,
                    maps_out: 16,
                    stride: 1,
                    activation: Activation::Relu,
                },
                LayerSpec::Pool {
                    kernel: (2, 2),
                    stride: 2,
                },
                LayerSpec::Flatten,
                LayerSpec::Dense {
                    inputs: 16 * 14 * 14,
                    outputs: crate::NUM_TRAIN_CLASSES,
                    activation: Activation::Identity,
                },
            ],
            frozen_prefix: 0,
            num_classes: crate::NUM_TRAIN_CLASSES,
        }
    }

    /// Count of leading conv / residual layers.
    pub fn conv_prefix(&self) -> usize {
        self.layers
            .iter()
            .take_while(|l| matches!(l, LayerSpec::Conv { .. } | LayerSpec::ResidualBlock { .. }))
            .count()
    }

    /// Input shape of every layer followed by the output shape of the last.
    pub fn shapes(&self) -> Result<Vec<Shape>> {
        let bad = |i: usize, why: String| Error::Shape(format!("layer {i}: {why}"));
        let (c, h, w) = self.input;
        let mut shapes = vec![Shape::Maps(c, h, w)];
        for (i, layer) in self.layers.iter().enumerate() {
            let cur = *shapes.last().expect("nonempty");
            let next = match (layer, cur) {
                (
                    LayerSpec::Conv {
                        kernel: (kh, kw),
                        maps_in,
                        maps_out,
                        stride,
                        ..
                    },
                    Shape::Maps(c, h, w),
                ) => {
                    if *maps_in != c {
                        return Err(bad(i, format!("expects {maps_in} input maps, gets {c}")));
                    }
                    match (sliding(h, *kh, *stride), sliding(w, *kw, *stride)) {
                        (Some(oh), Some(ow)) if *maps_out > 0 => Shape::Maps(*maps_out, oh, ow),
                        _ => return Err(bad(i, format!("kernel {kh}x{kw} does not fit {h}x{w}"))),
                    }
                }
                (LayerSpec::Pool { kernel: (kh, kw), stride }, Shape::Maps(c, h, w)) => {
                    match (sliding(h, *kh, *stride), sliding(w, *kw, *stride)) {
                        (Some(oh), Some(ow)) => Shape::Maps(c, oh, ow),
                        _ => return Err(bad(i, format!("pool {kh}x{kw} does not fit {h}x{w}"))),
                    }
                }
                (
                    LayerSpec::ResidualBlock {
                        kernel: (kh, kw),
                        maps,
                        ..
                    },
                    Shape::Maps(c, _, _),
                ) => {
                    if *maps != c {
                        return Err(bad(i, format!("residual block of {maps} maps gets {c}")));
                    }
                    if kh % 2 == 0 || kw % 2 == 0 {
                        return Err(bad(i, "residual kernel must be odd-sized".into()));
                    }
                    cur
                }
                (LayerSpec::Flatten, s) => Shape::Flat(s.len()),
                (
                    LayerSpec::Dense {
                        inputs, outputs, ..
                    },
                    Shape::Flat(n),
                ) => {
                    if *inputs != n {
                        return Err(bad(i, format!("dense expects {inputs} inputs, gets {n}")));
                    }
                    Shape::Flat(*outputs)
                }
                (l, s) => return Err(bad(i, format!("{l:?} cannot follow shape {s:?}"))),
            };
            shapes.push(next);
        }
        Ok(shapes)
    }

    pub fn validate(&self) -> Result<()> {
        let shapes = self.shapes()?;
        if !matches!(self.layers.last(), Some(LayerSpec::Dense { .. })) {
            return Err(Error::Shape("the last layer must be dense".into()));
        }
        if shapes.last() != Some(&Shape::Flat(self.num_classes)) {
            return Err(Error::Shape(format!(
                "the network must end in {} outputs",
                self.num_classes
            )));
        }
        if self.frozen_prefix > self.layers.len() {
            return Err(Error::Shape(format!(
                "frozen_prefix {} exceeds {} layers",
                self.frozen_prefix,
                self.layers.len()
            )));
        }
        Ok(())
    }

    /// Same layers and input; the frozen prefix is ignored.
    pub fn same_architecture(&self, other: &CnnSpec) -> bool {
        self.input == other.input && self.layers == other.layers && self.num_classes == other.num_classes
    }
}
