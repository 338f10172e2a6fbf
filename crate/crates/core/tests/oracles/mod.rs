//! Straight-line reference implementations used as test oracles.
//!
//! Everything here is written with explicit loops over plain indices and
//! shares no code with the library beyond reading its public data.

#![allow(dead_code, clippy::needless_range_loop)]

use std::collections::{BTreeMap, HashMap};

use ndarray::{Array1, Array2, Array3, Array4};
use reactlens::analytics::{Atlas, UNRESOLVED};
use reactlens::image_model::{Activation, CnnParams, LayerParams, LayerSpec};
use reactlens::text_model::AttentionLstmParams;
use reactlens::{Annotation, PostRecord, SentimentClass};

fn exp_normalize(scores: &[f64]) -> Vec<f64> {
    let mut max = scores[0];
    for &s in scores {
        if s > max {
            max = s;
        }
    }
    let mut out = vec![0.0; scores.len()];
    let mut total = 0.0;
    for i in 0..scores.len() {
        out[i] = (scores[i] - max).exp();
        total += out[i];
    }
    for v in &mut out {
        *v /= total;
    }
    out
}

/// `M = tanh([W_h H; W_v v_a ⊗ e_N])`, `α = softmax(wᵀM)`, `r = H αᵀ`.
pub fn attention(h: &Array2<f64>, v_a: &Array1<f64>, p: &AttentionLstmParams) -> (Vec<f64>, Vec<f64>) {
    let d = h.nrows();
    let n = h.ncols();
    let a = v_a.len();
    let mut m = vec![vec![0.0; n]; d + a];
    for row in 0..d {
        for col in 0..n {
            let mut s = 0.0;
            for k in 0..d {
                s += p.w_h[[row, k]] * h[[k, col]];
            }
            m[row][col] = s.tanh();
        }
    }
    for row in 0..a {
        let mut s = 0.0;
        for k in 0..a {
            s += p.w_v[[row, k]] * v_a[k];
        }
        for col in 0..n {
            m[d + row][col] = s.tanh();
        }
    }
    let mut scores = vec![0.0; n];
    for col in 0..n {
        for row in 0..d + a {
            scores[col] += p.w[row] * m[row][col];
        }
    }
    let alpha = exp_normalize(&scores);
    let mut r = vec![0.0; d];
    for row in 0..d {
        for col in 0..n {
            r[row] += h[[row, col]] * alpha[col];
        }
    }
    (alpha, r)
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Full forward pass: LSTM over `[E[tok]; v_a]`, attention, projection and
/// softmax head.
pub fn text_forward(tokens: &[usize], p: &AttentionLstmParams) -> Vec<f64> {
    let dims = p.dims;
    let (e, d, a) = (dims.embed, dims.hidden, dims.aspect);
    let tokens: Vec<usize> = if tokens.is_empty() { vec![0] } else { tokens.to_vec() };
    let n = tokens.len();
    let mut hidden = Array2::zeros((d, n));
    let mut h = vec![0.0; d];
    let mut c = vec![0.0; d];
    for (t, &tok) in tokens.iter().enumerate() {
        let tok = if tok < dims.vocab { tok } else { 1 };
        let mut x = vec![0.0; e + a];
        for k in 0..e {
            x[k] = p.embedding[[tok, k]];
        }
        for k in 0..a {
            x[e + k] = p.aspect[k];
        }
        let mut z = vec![0.0; 4 * d];
        for row in 0..4 * d {
            let mut s = p.lstm_bias[row];
            for k in 0..e + a {
                s += p.lstm_input[[row, k]] * x[k];
            }
            for k in 0..d {
                s += p.lstm_hidden[[row, k]] * h[k];
            }
            z[row] = s;
        }
        for j in 0..d {
            let i = sigmoid(z[j]);
            let f = sigmoid(z[d + j]);
            let o = sigmoid(z[2 * d + j]);
            let g = z[3 * d + j].tanh();
            c[j] = f * c[j] + i * g;
            h[j] = o * c[j].tanh();
            hidden[[j, t]] = h[j];
        }
    }
    let (_, r) = attention(&hidden, &p.aspect, p);
    let mut h_star = vec![0.0; d];
    for row in 0..d {
        let mut s = 0.0;
        for k in 0..d {
            s += p.w_p[[row, k]] * r[k] + p.w_x[[row, k]] * h[k];
        }
        h_star[row] = s.tanh();
    }
    let classes = dims.classes;
    let mut logits = vec![0.0; classes];
    for row in 0..classes {
        logits[row] = p.b_s[row];
        for k in 0..d {
            logits[row] += p.w_s[[row, k]] * h_star[k];
        }
    }
    exp_normalize(&logits)
}

/// Valid cross-correlation as a direct sum.
pub fn convolve(x: &Array3<f64>, w: &Array4<f64>, b: &Array1<f64>, stride: usize) -> Array3<f64> {
    let (maps_in, h, wd) = x.dim();
    let (maps_out, _, kh, kw) = w.dim();
    let oh = (h - kh) / stride + 1;
    let ow = (wd - kw) / stride + 1;
    let mut y = Array3::zeros((maps_out, oh, ow));
    for n in 0..maps_out {
        for i in 0..oh {
            for j in 0..ow {
                let mut s = b[n];
                for m in 0..maps_in {
                    for ki in 0..kh {
                        for kj in 0..kw {
                            s += w[[n, m, ki, kj]] * x[[m, i * stride + ki, j * stride + kj]];
                        }
                    }
                }
                y[[n, i, j]] = s;
            }
        }
    }
    y
}

fn act(a: Activation, v: f64) -> f64 {
    match a {
        Activation::Relu => {
            if v > 0.0 {
                v
            } else {
                0.0
            }
        }
        Activation::Tanh => v.tanh(),
        Activation::Identity => v,
    }
}

/// Layer-by-layer forward pass built from the direct-sum convolution.
pub fn cnn_forward(image: &Array3<f64>, p: &CnnParams) -> Vec<f64> {
    let mut maps = image.clone();
    let mut flat: Vec<f64> = Vec::new();
    for (spec, params) in p.spec.layers.iter().zip(&p.layers) {
        match (spec, params) {
            (LayerSpec::Conv { stride, activation, .. }, LayerParams::Conv { w, b }) => {
                maps = convolve(&maps, w, b, *stride).mapv(|v| act(*activation, v));
            }
            (LayerSpec::ResidualBlock { kernel, activation, .. }, LayerParams::Conv { w, b }) => {
                let (c, h, wd) = maps.dim();
                let (ph, pw) = (kernel.0 / 2, kernel.1 / 2);
                let mut padded = Array3::zeros((c, h + 2 * ph, wd + 2 * pw));
                for ch in 0..c {
                    for i in 0..h {
                        for j in 0..wd {
                            padded[[ch, i + ph, j + pw]] = maps[[ch, i, j]];
                        }
                    }
                }
                let branch = convolve(&padded, w, b, 1).mapv(|v| act(*activation, v));
                maps = &maps + &branch;
            }
            (LayerSpec::Pool { kernel, stride }, _) => {
                let (c, h, wd) = maps.dim();
                let oh = (h - kernel.0) / stride + 1;
                let ow = (wd - kernel.1) / stride + 1;
                let mut out = Array3::zeros((c, oh, ow));
                for ch in 0..c {
                    for i in 0..oh {
                        for j in 0..ow {
                            let mut best = f64::NEG_INFINITY;
                            for ki in 0..kernel.0 {
                                for kj in 0..kernel.1 {
                                    best = best.max(maps[[ch, i * stride + ki, j * stride + kj]]);
                                }
                            }
                            out[[ch, i, j]] = best;
                        }
                    }
                }
                maps = out;
            }
            (LayerSpec::Flatten, _) => {
                if flat.is_empty() {
                    flat = maps.iter().copied().collect();
                }
            }
            (LayerSpec::Dense { activation, .. }, LayerParams::Dense { w, b }) => {
                let mut out = vec![0.0; w.nrows()];
                for r in 0..w.nrows() {
                    let mut s = b[r];
                    for k in 0..w.ncols() {
                        s += w[[r, k]] * flat[k];
                    }
                    out[r] = act(*activation, s);
                }
                flat = out;
            }
            _ => panic!("params do not follow spec"),
        }
    }
    exp_normalize(&flat)
}

/// Winding-number point-in-polygon over the atlas outlines; first country
/// in table order wins.
pub fn resolve(lat: f64, lon: f64, atlas: &Atlas) -> String {
    for country in atlas.countries() {
        for poly in &country.polygons {
            let ring = poly.ring();
            let mut winding = 0i32;
            for i in 0..ring.len() {
                let (x0, y0) = ring[i];
                let (x1, y1) = ring[(i + 1) % ring.len()];
                let cross = (x1 - x0) * (lat - y0) - (lon - x0) * (y1 - y0);
                if y0 <= lat {
                    if y1 > lat && cross > 0.0 {
                        winding += 1;
                    }
                } else if y1 <= lat && cross < 0.0 {
                    winding -= 1;
                }
            }
            if winding != 0 {
                return country.code.clone();
            }
        }
    }
    UNRESOLVED.to_string()
}

/// For each post: drop all but the last record per annotator, then keep the
/// greatest `(labeled_at, annotator_id)`.
pub fn labels(annotations: &[Annotation]) -> HashMap<String, Annotation> {
    let mut last: HashMap<(String, String), Annotation> = HashMap::new();
    for a in annotations {
        last.insert((a.post_id.clone(), a.annotator_id.clone()), a.clone());
    }
    let mut out: HashMap<String, Annotation> = HashMap::new();
    for a in last.into_values() {
        let replace = match out.get(&a.post_id) {
            None => true,
            Some(cur) => (a.labeled_at, a.annotator_id.as_str()) > (cur.labeled_at, cur.annotator_id.as_str()),
        };
        if replace {
            out.insert(a.post_id.clone(), a);
        }
    }
    out
}

fn coords(p: &PostRecord) -> Option<(f64, f64)> {
    let lat = p.latitude.as_ref()?.valid()?;
    let lon = p.longitude.as_ref()?.valid()?;
    ((-90.0..=90.0).contains(&lat) && (-180.0..=180.0).contains(&lon)).then_some((lat, lon))
}

fn count(v: &Option<reactlens::corpus::Numeric<u64>>) -> Option<u64> {
    v.as_ref().and_then(|n| n.valid())
}

/// `(lat_bin, lon_bin) -> (posts, likes, comments)`
pub fn geo(posts: &[PostRecord], res: f64) -> BTreeMap<(i64, i64), (u64, u64, u64)> {
    let mut out = BTreeMap::new();
    for p in posts {
        if let Some((lat, lon)) = coords(p) {
            let key = ((lat / res).floor() as i64, (lon / res).floor() as i64);
            let e = out.entry(key).or_insert((0, 0, 0));
            e.0 += 1;
            e.1 += count(&p.likes_count).unwrap_or(0);
            e.2 += count(&p.comments_count).unwrap_or(0);
        }
    }
    out
}

/// `code -> (posts, per-caption-class counts)` over geolocated posts.
pub fn countries(posts: &[PostRecord], annotations: &[Annotation], atlas: &Atlas) -> BTreeMap<String, (u64, [u64; 5])> {
    let labels = labels(annotations);
    let mut out = BTreeMap::new();
    for p in posts {
        if let Some((lat, lon)) = coords(p) {
            let e = out.entry(resolve(lat, lon, atlas)).or_insert((0, [0; 5]));
            e.0 += 1;
            if let Some(a) = labels.get(&p.post_id) {
                e.1[a.caption_class as usize - 1] += 1;
            }
        }
    }
    out
}

pub fn overlap(annotations: &[Annotation]) -> [[u64; 5]; 5] {
    let mut m = [[0; 5]; 5];
    for a in labels(annotations).values() {
        m[a.image_class as usize - 1][a.caption_class as usize - 1] += 1;
    }
    m
}

/// Mean `(comments+1)/(likes+1)` per class code, by image label and by
/// caption label. Each post counts once.
pub fn engagement_means(posts: &[PostRecord], annotations: &[Annotation]) -> (Vec<Option<f64>>, Vec<Option<f64>>) {
    let labels = labels(annotations);
    let mut seen = std::collections::HashSet::new();
    let mut by_image = vec![Vec::new(); 5];
    let mut by_caption = vec![Vec::new(); 5];
    for p in posts {
        let (Some(a), Some(l), Some(c)) = (labels.get(&p.post_id), count(&p.likes_count), count(&p.comments_count)) else {
            continue;
        };
        if !seen.insert(p.post_id.clone()) {
            continue;
        }
        let r = (c as f64 + 1.0) / (l as f64 + 1.0);
        by_image[a.image_class as usize - 1].push(r);
        by_caption[a.caption_class as usize - 1].push(r);
    }
    let mean = |v: &Vec<f64>| {
        if v.is_empty() {
            None
        } else {
            Some(v.iter().sum::<f64>() / v.len() as f64)
        }
    };
    (by_image.iter().map(mean).collect(), by_caption.iter().map(mean).collect())
}

pub fn class(code: u8) -> SentimentClass {
    SentimentClass::try_from(code).unwrap()
}
