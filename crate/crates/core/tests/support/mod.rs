//! Test fixtures and finite-difference checks shared by several targets.

#![allow(dead_code)]

use ndarray::Array3;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use reactlens::corpus::fixture::generate_fixture;
use reactlens::corpus::Numeric;
use reactlens::image_model::{self, Activation, CnnParams, CnnSpec, LayerParams, LayerSpec};
use reactlens::text_model::{self, AttentionLstmParams, ModelDims};
use reactlens::{Annotation, MediaKind, PostRecord, SentimentClass};

/// A generated corpus plus stray posts anywhere on the globe and extra
/// annotations from competing annotators, some with tied timestamps.
pub fn random_fixture(seed: u64) -> (Vec<PostRecord>, Vec<Annotation>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(30..160);
    let fx = generate_fixture(seed, n).unwrap();
    let mut posts = fx.posts;
    let mut anns = fx.annotations;
    for i in 0..rng.random_range(0..40) {
        let mut p = PostRecord::new(format!("stray{seed}_{i}"));
        p.shortcode = Some(format!("st{i}"));
        p.created_at = Some(Numeric::Valid(1_582_000_000));
        p.media_kind = Some(MediaKind::Image);
        p.caption = Some("stray".into());
        p.likes_count = Some(Numeric::Valid(rng.random_range(0..3000)));
        p.comments_count = Some(Numeric::Valid(rng.random_range(0..300)));
        p.latitude = Some(Numeric::Valid(rng.random_range(-90.0..=90.0)));
        p.longitude = Some(Numeric::Valid(rng.random_range(-180.0..=180.0)));
        posts.push(p);
    }
    let ids: Vec<String> = posts.iter().map(|p| p.post_id.clone()).collect();
    for _ in 0..rng.random_range(0..60) {
        anns.push(Annotation {
            post_id: ids[rng.random_range(0..ids.len())].clone(),
            image_class: SentimentClass::ALL[rng.random_range(0..5)],
            caption_class: SentimentClass::ALL[rng.random_range(0..5)],
            annotator_id: ["ana", "bo", "cy"][rng.random_range(0..3)].into(),
            labeled_at: 1_583_000_000 + rng.random_range(0..4),
        });
    }
    posts.shuffle(&mut rng);
    (posts, anns)
}

pub const FD_EPS: f64 = 1e-5;
pub const FD_TOL: f64 = 1e-4;

pub fn rel_err(a: f64, b: f64) -> f64 {
    let denom = a.abs().max(b.abs());
    if denom < 1e-8 {
        (a - b).abs()
    } else {
        (a - b).abs() / denom
    }
}

/// Worst relative error over every coordinate, and where it occurred.
#[derive(Debug, Default)]
pub struct FdReport {
    pub worst: f64,
    pub at: String,
    pub checked: usize,
}

impl FdReport {
    fn add(&mut self, analytic: f64, numeric: f64, at: impl FnOnce() -> String) {
        let e = rel_err(analytic, numeric);
        self.checked += 1;
        if e > self.worst || self.checked == 1 {
            self.worst = e;
            self.at = format!("{} analytic {analytic} numeric {numeric}", at());
        }
    }
}

/// Larger-than-default weights so every path carries a visible gradient.
pub fn fd_text_params(seed: u64) -> AttentionLstmParams {
    let dims = ModelDims::new(7, 3, 4);
    let mut p = AttentionLstmParams::init(dims, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed + 100);
    for (_, v) in p.tensors_mut() {
        for x in v.iter_mut() {
            *x = rng.random_range(-0.6..0.6);
        }
    }
    p
}

pub fn text_gradient_check(seed: u64) -> FdReport {
    let p = fd_text_params(seed);
    let tokens = [2, 5, 3];
    let label = (seed as usize) % 4;
    let (_, grad) = text_model::loss_and_gradient(&tokens, label, &p);
    let mut report = FdReport::default();
    for (ti, name) in text_model::TENSOR_NAMES.iter().enumerate() {
        let analytic = grad.tensor(name).unwrap().to_vec();
        for (k, &g) in analytic.iter().enumerate() {
            let mut plus = p.clone();
            plus.tensors_mut()[ti].1[k] += FD_EPS;
            let mut minus = p.clone();
            minus.tensors_mut()[ti].1[k] -= FD_EPS;
            let fd = (text_model::loss(&tokens, label, &plus) - text_model::loss(&tokens, label, &minus))
                / (2.0 * FD_EPS);
            report.add(g, fd, || format!("{name}[{k}]"));
        }
    }
    report
}

pub fn fd_cnn_spec() -> CnnSpec {
    CnnSpec {
        input: (2, 5, 5),
        layers: vec![
            LayerSpec::Conv {
                kernel: (2, 2),
                maps_in: 2,
                maps_out: 3,
                stride: 1,
                activation: Activation::Tanh,
            },
            LayerSpec::ResidualBlock {
                kernel: (3, 3),
                maps: 3,
                activation: Activation::Tanh,
            },
            LayerSpec::Pool {
                kernel: (2, 2),
                stride: 2,
            },
            LayerSpec::Flatten,
            LayerSpec::Dense {
                inputs: 12,
                outputs: 5,
                activation: Activation::Tanh,
            },
            LayerSpec::Dense {
                inputs: 5,
                outputs: 4,
                activation: Activation::Identity,
            },
        ],
        frozen_prefix: 0,
        num_classes: 4,
    }
}

fn cnn_loss(x: &Array3<f64>, label: usize, p: &CnnParams) -> f64 {
    -image_model::forward(x.view(), p).unwrap()[label].ln()
}

fn layer_values_mut(p: &mut CnnParams, layer: usize, tensor: usize) -> &mut [f64] {
    match &mut p.layers[layer] {
        LayerParams::Conv { w, b } => {
            if tensor == 0 {
                w.as_slice_mut().unwrap()
            } else {
                b.as_slice_mut().unwrap()
            }
        }
        LayerParams::Dense { w, b } => {
            if tensor == 0 {
                w.as_slice_mut().unwrap()
            } else {
                b.as_slice_mut().unwrap()
            }
        }
        LayerParams::None => &mut [],
    }
}

pub fn cnn_gradient_check(seed: u64) -> FdReport {
    let spec = fd_cnn_spec();
    let p = CnnParams::init(&spec, seed).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = Array3::from_shape_fn((2, 5, 5), |_| rng.random_range(0.0..1.0));
    let label = seed as usize % 4;
    let (_, mut grad) = image_model::loss_and_gradient(x.view(), label, &p).unwrap();
    let mut report = FdReport::default();
    for layer in 0..spec.layers.len() {
        for tensor in 0..2 {
            let analytic = layer_values_mut(&mut grad, layer, tensor).to_vec();
            for (k, &g) in analytic.iter().enumerate() {
                let mut plus = p.clone();
                layer_values_mut(&mut plus, layer, tensor)[k] += FD_EPS;
                let mut minus = p.clone();
                layer_values_mut(&mut minus, layer, tensor)[k] -= FD_EPS;
                let fd = (cnn_loss(&x, label, &plus) - cnn_loss(&x, label, &minus)) / (2.0 * FD_EPS);
                report.add(g, fd, || format!("layer {layer} tensor {tensor}[{k}]"));
            }
        }
    }
    report
}
