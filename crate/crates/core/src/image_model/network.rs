use ndarray::{Array1, Array2, Array3, Array4, ArrayView3, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::conv::{col2im, convolve_cols, flat_weights, im2col, max_pool, out_dims, pad};
use super::spec::{Activation, CnnSpec, LayerSpec};
use crate::checkpoint::Checkpoint;
use crate::text_model::softmax;
use crate::{Error, Result};

pub const CHECKPOINT_KIND: &str = "cnn";

#[derive(Debug, Clone, PartialEq)]
pub enum LayerParams {
    None,
    /// `w` is `(maps_out, maps_in, kh, kw)`.
    Conv { w: Array4<f64>, b: Array1<f64> },
    /// `w` is `(outputs, inputs)`.
    Dense { w: Array2<f64>, b: Array1<f64> },
}

impl LayerParams {
    fn tensors(&self) -> Vec<(&'static str, Vec<usize>, &[f64])> {
        fn v(s: Option<&[f64]>) -> &[f64] {
            s.expect("standard layout")
        }
        match self {
            LayerParams::None => vec![],
            LayerParams::Conv { w, b } => vec![
                ("w", w.shape().to_vec(), v(w.as_slice())),
                ("b", b.shape().to_vec(), v(b.as_slice())),
            ],
            LayerParams::Dense { w, b } => vec![
                ("w", w.shape().to_vec(), v(w.as_slice())),
                ("b", b.shape().to_vec(), v(b.as_slice())),
            ],
        }
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        fn v(s: Option<&mut [f64]>) -> &mut [f64] {
            s.expect("standard layout")
        }
        match self {
            LayerParams::None => vec![],
            LayerParams::Conv { w, b } => vec![v(w.as_slice_mut()), v(b.as_slice_mut())],
            LayerParams::Dense { w, b } => vec![v(w.as_slice_mut()), v(b.as_slice_mut())],
        }
    }
}

/// Weights for every layer of a [`CnnSpec`].
#[derive(Debug, Clone, PartialEq)]
pub struct CnnParams {
    pub spec: CnnSpec,
    pub layers: Vec<LayerParams>,
}

impl CnnParams {
    pub fn zeros(spec: &CnnSpec) -> Result<Self> {
        spec.validate()?;
        let layers = spec
            .layers
            .iter()
            .map(|l| match *l {
                LayerSpec::Conv {
                    kernel: (kh, kw),
                    maps_in,
                    maps_out,
                    ..
                } => LayerParams::Conv {
                    w: Array4::zeros((maps_out, maps_in, kh, kw)),
                    b: Array1::zeros(maps_out),
                },
                LayerSpec::ResidualBlock {
                    kernel: (kh, kw),
                    maps,
                    ..
                } => LayerParams::Conv {
                    w: Array4::zeros((maps, maps, kh, kw)),
                    b: Array1::zeros(maps),
                },
                LayerSpec::Dense {
                    inputs, outputs, ..
                } => LayerParams::Dense {
                    w: Array2::zeros((outputs, inputs)),
                    b: Array1::zeros(outputs),
                },
                LayerSpec::Pool { .. } | LayerSpec::Flatten => LayerParams::None,
            })
            .collect();
        Ok(CnnParams {
            spec: spec.clone(),
            layers,
        })
    }

    /// He-uniform weights (`±sqrt(6 / fan_in)`), zero biases.
    pub fn init(spec: &CnnSpec, seed: u64) -> Result<Self> {
        let mut p = Self::zeros(spec)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for layer in &mut p.layers {
            let (w, fan_in) = match layer {
                LayerParams::None => continue,
                LayerParams::Conv { w, .. } => {
                    let (_, m, kh, kw) = w.dim();
                    (w.as_slice_mut().expect("standard layout"), m * kh * kw)
                }
                LayerParams::Dense { w, .. } => {
                    let fan_in = w.ncols();
                    (w.as_slice_mut().expect("standard layout"), fan_in)
                }
            };
            let bound = (6.0 / fan_in as f64).sqrt();
            for v in w.iter_mut() {
                *v = rng.random_range(-bound..bound);
            }
        }
        Ok(p)
    }

    /// `("layer{i}.w" | "layer{i}.b", dims, values)` in layer order.
    pub fn tensors(&self) -> Vec<(String, Vec<usize>, &[f64])> {
        self.layers
            .iter()
            .enumerate()
            .flat_map(|(i, l)| {
                l.tensors()
                    .into_iter()
                    .map(move |(n, dims, v)| (format!("layer{i}.{n}"), dims, v))
            })
            .collect()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors()
            .iter()
            .all(|(_, _, v)| v.iter().all(|x| x.is_finite()))
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let mut ck = Checkpoint::new(CHECKPOINT_KIND);
        ck.metadata.push((
            "spec".into(),
            serde_json::to_string(&self.spec).expect("spec serializes"),
        ));
        for (name, dims, values) in self.tensors() {
            ck.push(name, &dims, values);
        }
        ck
    }

    /// Loads parameters, rejecting tensors whose shape disagrees with the
    /// stored spec or an architecture mismatch with `expected`.
    pub fn from_checkpoint(ck: &Checkpoint, expected: Option<&CnnSpec>) -> Result<Self> {
        ck.expect_kind(CHECKPOINT_KIND)?;
        let spec: CnnSpec = serde_json::from_str(
            ck.meta("spec")
                .ok_or_else(|| Error::Checkpoint("missing spec metadata".into()))?,
        )?;
        if let Some(exp) = expected {
            if !exp.same_architecture(&spec) {
                return Err(Error::Shape(
                    "checkpoint architecture differs from the configured spec".into(),
                ));
            }
        }
        let mut p = Self::zeros(&spec)?;
        let names: Vec<(String, Vec<usize>)> = p
            .tensors()
            .into_iter()
            .map(|(n, d, _)| (n, d))
            .collect();
        let dsts = p.layers.iter_mut().flat_map(|l| l.tensors_mut());
        for ((name, dims), dst) in names.iter().zip(dsts) {
            dst.copy_from_slice(&ck.tensor(name, dims)?.values);
        }
        if !p.is_finite() {
            return Err(Error::Checkpoint("non-finite parameter values".into()));
        }
        Ok(p)
    }

    pub(crate) fn layer_slices_mut(&mut self, layer: usize) -> Vec<&mut [f64]> {
        self.layers[layer].tensors_mut()
    }

    pub(crate) fn layer_slices(&self, layer: usize) -> Vec<&[f64]> {
        self.layers[layer]
            .tensors()
            .into_iter()
            .map(|(_, _, v)| v)
            .collect()
    }
}

#[derive(Debug, Clone)]
enum Value {
    Maps(Array3<f64>),
    Flat(Array1<f64>),
}

impl Value {
    fn maps(&self) -> &Array3<f64> {
        match self {
            Value::Maps(m) => m,
            Value::Flat(_) => unreachable!("spec validated: maps expected"),
        }
    }

    fn flat(&self) -> &Array1<f64> {
        match self {
            Value::Flat(v) => v,
            Value::Maps(_) => unreachable!("spec validated: vector expected"),
        }
    }
}

#[derive(Debug, Clone)]
enum Cache {
    Conv {
        cols: Array2<f64>,
        in_dim: (usize, usize, usize),
    },
    Residual {
        cols: Array2<f64>,
        padded_dim: (usize, usize, usize),
        branch: Array3<f64>,
    },
    Pool {
        argmax: Array1<usize>,
        in_dim: (usize, usize, usize),
    },
    /// `None` when the input was already a vector.
    Flatten {
        in_dim: Option<(usize, usize, usize)>,
    },
    Dense {
        input: Array1<f64>,
    },
}

/// Layer outputs and what backprop needs.
#[derive(Debug, Clone)]
pub struct Trace {
    caches: Vec<Cache>,
    outputs: Vec<Value>,
    pub probs: Array1<f64>,
}

fn check_input(image: ArrayView3<f64>, spec: &CnnSpec) -> Result<()> {
    if image.dim() != spec.input {
        return Err(Error::Shape(format!(
            "image is {:?}, spec expects {:?}",
            image.dim(),
            spec.input
        )));
    }
    Ok(())
}

pub fn forward_trace(image: ArrayView3<f64>, p: &CnnParams) -> Result<Trace> {
    check_input(image, &p.spec)?;
    let mut caches = Vec::with_capacity(p.layers.len());
    let mut outputs = Vec::with_capacity(p.layers.len());
    let mut cur = Value::Maps(image.to_owned());
    for (spec, params) in p.spec.layers.iter().zip(&p.layers) {
        let (cache, next) = match (spec, params) {
            (
                LayerSpec::Conv {
                    kernel,
                    stride,
                    activation,
                    ..
                },
                LayerParams::Conv { w, b },
            ) => {
                let x = cur.maps();
                let cols = im2col(x.view(), *kernel, *stride);
                let y = convolve_cols(&cols, w.view(), b.view(), out_dims(x.dim(), *kernel, *stride))
                    .mapv(|v| activation.apply(v));
                (
                    Cache::Conv {
                        cols,
                        in_dim: x.dim(),
                    },
                    Value::Maps(y),
                )
            }
            (
                LayerSpec::ResidualBlock {
                    kernel, activation, ..
                },
                LayerParams::Conv { w, b },
            ) => {
                let x = cur.maps();
                let padded = pad(x.view(), kernel.0 / 2, kernel.1 / 2);
                let cols = im2col(padded.view(), *kernel, 1);
                let branch = convolve_cols(&cols, w.view(), b.view(), (x.dim().1, x.dim().2))
                    .mapv(|v| activation.apply(v));
                let y = &branch + x;
                (
                    Cache::Residual {
                        cols,
                        padded_dim: padded.dim(),
                        branch,
                    },
                    Value::Maps(y),
                )
            }
            (LayerSpec::Pool { kernel, stride }, _) => {
                let x = cur.maps();
                let (y, argmax) = max_pool(x.view(), *kernel, *stride);
                (
                    Cache::Pool {
                        argmax,
                        in_dim: x.dim(),
                    },
                    Value::Maps(y),
                )
            }
            (LayerSpec::Flatten, _) => match &cur {
                Value::Maps(x) => (
                    Cache::Flatten {
                        in_dim: Some(x.dim()),
                    },
                    Value::Flat(Array1::from_iter(x.iter().copied())),
                ),
                Value::Flat(_) => (Cache::Flatten { in_dim: None }, cur.clone()),
            },
            (LayerSpec::Dense { activation, .. }, LayerParams::Dense { w, b }) => {
                let x = cur.flat();
                let y = (w.dot(x) + b).mapv(|v| activation.apply(v));
                (Cache::Dense { input: x.clone() }, Value::Flat(y))
            }
            _ => unreachable!("params are built from the spec"),
        };
        caches.push(cache);
        outputs.push(next.clone());
        cur = next;
    }
    let probs = softmax(cur.flat().view());
    Ok(Trace {
        caches,
        outputs,
        probs,
    })
}

/// Class distribution over the four training classes.
pub fn forward(image: ArrayView3<f64>, p: &CnnParams) -> Result<Array1<f64>> {
    Ok(forward_trace(image, p)?.probs)
}

fn activation_of(spec: &LayerSpec) -> Activation {
    match spec {
        LayerSpec::Conv { activation, .. }
        | LayerSpec::ResidualBlock { activation, .. }
        | LayerSpec::Dense { activation, .. } => *activation,
        LayerSpec::Pool { .. } | LayerSpec::Flatten => Activation::Identity,
    }
}

/// Adds the cross-entropy gradient of one sample into `grad` for layers
/// `stop..`; earlier layers are left untouched and not back-propagated into.
/// Returns the loss.
pub fn accumulate_gradient(
    trace: &Trace,
    label: usize,
    p: &CnnParams,
    grad: &mut CnnParams,
    stop: usize,
) -> f64 {
    let loss = -trace.probs[label].ln();
    let mut dlogits = trace.probs.clone();
    dlogits[label] -= 1.0;
    let mut dy = Value::Flat(dlogits);
    for layer in (stop..p.layers.len()).rev() {
        let act = activation_of(&p.spec.layers[layer]);
        let need_dx = layer > stop;
        let out = &trace.outputs[layer];
        dy = match (&trace.caches[layer], &p.layers[layer], &mut grad.layers[layer]) {
            (
                Cache::Conv { cols, in_dim },
                LayerParams::Conv { w, .. },
                LayerParams::Conv { w: gw, b: gb },
            ) => {
                let dz = dy.maps() * &out.maps().mapv(|v| act.derivative_at_output(v));
                let (m, oh, ow) = dz.dim();
                let dz = dz.into_shape_with_order((m, oh * ow)).expect("reshape");
                accumulate_conv(gw, gb, &dz, cols);
                if !need_dx {
                    break;
                }
                let (kh, kw) = (w.dim().2, w.dim().3);
                let stride = match p.spec.layers[layer] {
                    LayerSpec::Conv { stride, .. } => stride,
                    _ => unreachable!(),
                };
                let dcols = flat_weights(w.view()).t().dot(&dz);
                Value::Maps(col2im(dcols.view(), *in_dim, (kh, kw), stride))
            }
            (
                Cache::Residual {
                    cols,
                    padded_dim,
                    branch,
                },
                LayerParams::Conv { w, .. },
                LayerParams::Conv { w: gw, b: gb },
            ) => {
                let dout = dy.maps();
                let dz = dout * &branch.mapv(|v| act.derivative_at_output(v));
                let (m, h, wd) = dz.dim();
                let dz = dz.into_shape_with_order((m, h * wd)).expect("reshape");
                accumulate_conv(gw, gb, &dz, cols);
                if !need_dx {
                    break;
                }
                let (kh, kw) = (w.dim().2, w.dim().3);
                let dcols = flat_weights(w.view()).t().dot(&dz);
                let dpadded = col2im(dcols.view(), *padded_dim, (kh, kw), 1);
                let inner = dpadded.slice(ndarray::s![.., kh / 2..kh / 2 + h, kw / 2..kw / 2 + wd]);
                Value::Maps(&inner + dout)
            }
            (Cache::Pool { argmax, in_dim }, _, _) => {
                if !need_dx {
                    break;
                }
                let mut dx = Array3::<f64>::zeros(*in_dim);
                let flat = dx.as_slice_mut().expect("standard layout");
                for (g, &at) in dy.maps().iter().zip(argmax.iter()) {
                    flat[at] += g;
                }
                Value::Maps(dx)
            }
            (Cache::Flatten { in_dim }, _, _) => {
                if !need_dx {
                    break;
                }
                match in_dim {
                    Some(dim) => Value::Maps(
                        Array3::from_shape_vec(*dim, dy.flat().to_vec()).expect("reshape"),
                    ),
                    None => dy,
                }
            }
            (Cache::Dense { input }, LayerParams::Dense { w, .. }, LayerParams::Dense { w: gw, b: gb }) => {
                let dz = dy.flat() * &out.flat().mapv(|v| act.derivative_at_output(v));
                ndarray::linalg::general_mat_mul(
                    1.0,
                    &dz.view().insert_axis(Axis(1)),
                    &input.view().insert_axis(Axis(0)),
                    1.0,
                    gw,
                );
                *gb += &dz;
                if !need_dx {
                    break;
                }
                Value::Flat(w.t().dot(&dz))
            }
            _ => unreachable!("caches follow the spec"),
        };
    }
    loss
}

fn accumulate_conv(gw: &mut Array4<f64>, gb: &mut Array1<f64>, dz: &Array2<f64>, cols: &Array2<f64>) {
    let (m, c, kh, kw) = gw.dim();
    let dw = dz.dot(&cols.t());
    let mut gw2 = gw
        .view_mut()
        .into_shape_with_order((m, c * kh * kw))
        .expect("standard layout");
    gw2 += &dw;
    *gb += &dz.sum_axis(Axis(1));
}

/// Loss and full gradient for one sample.
pub fn loss_and_gradient(image: ArrayView3<f64>, label: usize, p: &CnnParams) -> Result<(f64, CnnParams)> {
    let trace = forward_trace(image, p)?;
    let mut grad = CnnParams::zeros(&p.spec)?;
    let loss = accumulate_gradient(&trace, label, p, &mut grad, 0);
    Ok((loss, grad))
}
