//! Forward and backward passes of the attention LSTM.
//!
//! Per step `t` with input `x_t = [E[token_t]; v_a]`:
//!
//! ```text
//! z   = W_in x_t + W_hh h_{t-1} + b
//! i,f,o = sigmoid(z_i), sigmoid(z_f), sigmoid(z_o);   g = tanh(z_g)
//! c_t = f * c_{t-1} + i * g;   h_t = o * tanh(c_t)
//! ```
//!
//! With `H = [h_1 .. h_N]` (hidden x N):
//!
//! ```text
//! M  = tanh([W_h H ; W_v v_a ⊗ e_N])      (hidden + aspect) x N
//! α  = softmax(wᵀ M)
//! r  = H αᵀ
//! h* = tanh(W_p r + W_x h_N)
//! y  = softmax(W_s h* + b_s)
//! ```

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};

use super::params::AttentionLstmParams;
use super::vocab::{OOV, PAD};
use crate::{Error, Result};

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Softmax with the maximum subtracted first.
pub fn softmax(logits: ArrayView1<f64>) -> Array1<f64> {
    let max = logits.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    let exp = logits.mapv(|v| (v - max).exp());
    let sum = exp.sum();
    exp / sum
}

/// `target += a bᵀ`
fn add_outer(target: &mut Array2<f64>, a: ArrayView1<f64>, b: ArrayView1<f64>) {
    for (mut row, &ai) in target.rows_mut().into_iter().zip(a.iter()) {
        if ai != 0.0 {
            row.scaled_add(ai, &b);
        }
    }
}

/// Intermediate values of the attention block.
#[derive(Debug, Clone, PartialEq)]
pub struct Attention {
    /// `(hidden + aspect) x N`
    pub m: Array2<f64>,
    /// `wᵀ M`
    pub scores: Array1<f64>,
    pub alpha: Array1<f64>,
    pub r: Array1<f64>,
}

/// Attention over hidden states `h` (hidden x N) for aspect vector `aspect`,
/// using the projection weights in `params`.
pub fn attention(
    h: ArrayView2<f64>,
    aspect: ArrayView1<f64>,
    params: &AttentionLstmParams,
) -> Result<Attention> {
    let (d, a) = (params.dims.hidden, params.dims.aspect);
    let n = h.ncols();
    if n == 0 {
        return Err(Error::Shape("attention over an empty sequence".into()));
    }
    if h.nrows() != d || aspect.len() != a {
        return Err(Error::Shape(format!(
            "attention expects H with {d} rows and aspect of length {a}, got {}x{} and {}",
            h.nrows(),
            n,
            aspect.len()
        )));
    }
    if params.w_h.dim() != (d, d) || params.w_v.dim() != (a, a) || params.w.len() != d + a {
        return Err(Error::Shape("attention weights inconsistent with dims".into()));
    }
    let top = params.w_h.dot(&h).mapv(f64::tanh);
    let bottom = params.w_v.dot(&aspect).mapv(f64::tanh);
    let mut m = Array2::zeros((d + a, n));
    m.slice_mut(s![..d, ..]).assign(&top);
    m.slice_mut(s![d.., ..])
        .assign(&bottom.broadcast((n, a)).expect("broadcast aspect").t());
    let scores = params.w.dot(&m);
    let alpha = softmax(scores.view());
    let r = h.dot(&alpha);
    Ok(Attention {
        m,
        scores,
        alpha,
        r,
    })
}

#[derive(Debug, Clone)]
struct Step {
    x: Array1<f64>,
    i: Array1<f64>,
    f: Array1<f64>,
    o: Array1<f64>,
    g: Array1<f64>,
    c: Array1<f64>,
    tanh_c: Array1<f64>,
}

/// Everything the backward pass needs from one forward pass.
#[derive(Debug, Clone)]
pub struct Trace {
    tokens: Vec<usize>,
    steps: Vec<Step>,
    /// `hidden x N`
    pub hidden: Array2<f64>,
    pub attention: Attention,
    pub h_star: Array1<f64>,
    pub probs: Array1<f64>,
}

/// Empty input is read as a single PAD; indices outside the vocabulary as OOV.
fn sanitize(tokens: &[usize], vocab: usize) -> Vec<usize> {
    if tokens.is_empty() {
        return vec![PAD];
    }
    tokens
        .iter()
        .map(|&t| if t < vocab { t } else { OOV })
        .collect()
}

pub fn forward_trace(tokens: &[usize], p: &AttentionLstmParams) -> Trace {
    let dims = p.dims;
    let d = dims.hidden;
    let tokens = sanitize(tokens, dims.vocab);
    let n = tokens.len();

    let mut steps = Vec::with_capacity(n);
    let mut hidden = Array2::zeros((d, n));
    let mut h = Array1::zeros(d);
    let mut c = Array1::zeros(d);
    for (t, &tok) in tokens.iter().enumerate() {
        let mut x = Array1::zeros(dims.lstm_input_width());
        x.slice_mut(s![..dims.embed]).assign(&p.embedding.row(tok));
        x.slice_mut(s![dims.embed..]).assign(&p.aspect);
        let z = p.lstm_input.dot(&x) + p.lstm_hidden.dot(&h) + &p.lstm_bias;
        let i = z.slice(s![..d]).mapv(sigmoid);
        let f = z.slice(s![d..2 * d]).mapv(sigmoid);
        let o = z.slice(s![2 * d..3 * d]).mapv(sigmoid);
        let g = z.slice(s![3 * d..]).mapv(f64::tanh);
        c = &f * &c + &i * &g;
        let tanh_c = c.mapv(f64::tanh);
        h = &o * &tanh_c;
        hidden.column_mut(t).assign(&h);
        steps.push(Step {
            x,
            i,
            f,
            o,
            g,
            c: c.clone(),
            tanh_c,
        });
    }

    let attention =
        attention(hidden.view(), p.aspect.view(), p).expect("shapes follow from params");
    let h_last = hidden.column(n - 1);
    let h_star = (p.w_p.dot(&attention.r) + p.w_x.dot(&h_last)).mapv(f64::tanh);
    let probs = softmax((p.w_s.dot(&h_star) + &p.b_s).view());
    Trace {
        tokens,
        steps,
        hidden,
        attention,
        h_star,
        probs,
    }
}

/// Class distribution over the four training classes.
pub fn forward(tokens: &[usize], p: &AttentionLstmParams) -> Array1<f64> {
    forward_trace(tokens, p).probs
}

/// Cross-entropy of the true class (training-class index).
pub fn loss(tokens: &[usize], label: usize, p: &AttentionLstmParams) -> f64 {
    -forward(tokens, p)[label].ln()
}

/// Adds the gradient of the cross-entropy loss for one sample into `grad`
/// and returns the loss.
pub fn accumulate_gradient(
    trace: &Trace,
    label: usize,
    p: &AttentionLstmParams,
    grad: &mut AttentionLstmParams,
) -> f64 {
    let dims = p.dims;
    let (d, e) = (dims.hidden, dims.embed);
    let n = trace.tokens.len();
    let loss = -trace.probs[label].ln();

    // output head
    let mut dlogits = trace.probs.clone();
    dlogits[label] -= 1.0;
    add_outer(&mut grad.w_s, dlogits.view(), trace.h_star.view());
    grad.b_s += &dlogits;
    let dh_star = p.w_s.t().dot(&dlogits);
    let dpre = &dh_star * &trace.h_star.mapv(|v| 1.0 - v * v);

    // h* = tanh(W_p r + W_x h_N)
    let att = &trace.attention;
    let h_last = trace.hidden.column(n - 1);
    add_outer(&mut grad.w_p, dpre.view(), att.r.view());
    add_outer(&mut grad.w_x, dpre.view(), h_last);
    let dr = p.w_p.t().dot(&dpre);
    let mut dh = Array2::<f64>::zeros((d, n));
    dh.column_mut(n - 1).scaled_add(1.0, &p.w_x.t().dot(&dpre));

    // r = H α
    let mut dalpha = Array1::zeros(n);
    for (t, col) in trace.hidden.columns().into_iter().enumerate() {
        dh.column_mut(t).scaled_add(att.alpha[t], &dr);
        dalpha[t] = col.dot(&dr);
    }

    // α = softmax(wᵀ M)
    let mean = att.alpha.dot(&dalpha);
    let dscores = &att.alpha * &(dalpha - mean);
    grad.w += &att.m.dot(&dscores);
    let mut dm = Array2::zeros((d + dims.aspect, n));
    for (mut col, &ds) in dm.columns_mut().into_iter().zip(dscores.iter()) {
        col.scaled_add(ds, &p.w);
    }

    // M top = tanh(W_h H)
    let top = att.m.slice(s![..d, ..]);
    let dtop = &dm.slice(s![..d, ..]) * &top.mapv(|v| 1.0 - v * v);
    grad.w_h += &dtop.dot(&trace.hidden.t());
    dh += &p.w_h.t().dot(&dtop);

    // M bottom = tanh(W_v v_a) repeated over columns
    let bottom = att.m.column(0).slice(s![d..]).to_owned();
    let dbottom = dm.slice(s![d.., ..]).sum_axis(Axis(1)) * bottom.mapv(|v| 1.0 - v * v);
    add_outer(&mut grad.w_v, dbottom.view(), p.aspect.view());
    grad.aspect += &p.w_v.t().dot(&dbottom);

    // back through time
    let mut dh_next = Array1::<f64>::zeros(d);
    let mut dc_next = Array1::<f64>::zeros(d);
    let zeros = Array1::<f64>::zeros(d);
    for t in (0..n).rev() {
        let st = &trace.steps[t];
        let c_prev = if t > 0 { &trace.steps[t - 1].c } else { &zeros };
        let h_prev = if t > 0 {
            trace.hidden.column(t - 1)
        } else {
            zeros.view()
        };
        let dh_t = &dh.column(t) + &dh_next;
        let d_o = &dh_t * &st.tanh_c;
        let dc = &dc_next + &(&dh_t * &st.o * &st.tanh_c.mapv(|v| 1.0 - v * v));
        let di = &dc * &st.g;
        let dg = &dc * &st.i;
        let df = &dc * c_prev;
        dc_next = &dc * &st.f;

        let mut dz = Array1::zeros(4 * d);
        dz.slice_mut(s![..d]).assign(&(&di * &st.i.mapv(|v| v * (1.0 - v))));
        dz.slice_mut(s![d..2 * d]).assign(&(&df * &st.f.mapv(|v| v * (1.0 - v))));
        dz.slice_mut(s![2 * d..3 * d]).assign(&(&d_o * &st.o.mapv(|v| v * (1.0 - v))));
        dz.slice_mut(s![3 * d..]).assign(&(&dg * &st.g.mapv(|v| 1.0 - v * v)));

        add_outer(&mut grad.lstm_input, dz.view(), st.x.view());
        add_outer(&mut grad.lstm_hidden, dz.view(), h_prev);
        grad.lstm_bias += &dz;
        let dx = p.lstm_input.t().dot(&dz);
        dh_next = p.lstm_hidden.t().dot(&dz);

        grad.embedding
            .row_mut(trace.tokens[t])
            .scaled_add(1.0, &dx.slice(s![..e]));
        grad.aspect += &dx.slice(s![e..]);
    }
    loss
}

/// Loss and full gradient for one sample.
pub fn loss_and_gradient(
    tokens: &[usize],
    label: usize,
    p: &AttentionLstmParams,
) -> (f64, AttentionLstmParams) {
    let trace = forward_trace(tokens, p);
    let mut grad = AttentionLstmParams::zeros(p.dims);
    let loss = accumulate_gradient(&trace, label, p, &mut grad);
    (loss, grad)
}
