//! Forward and backward passes for the recurrent encoder-decoder.
//!
//! The cell convention, used everywhere:
//!
//! ```text
//! z = sigmoid(Wz x + Uz h + bz)        update gate
//! r = sigmoid(Wr x + Ur h + br)        reset gate
//! n = tanh(Wn x + r * (Un h) + bn)     candidate state
//! h' = (1 - z) * n + z * h
//! ```
//!
//! The encoder runs one cell left-to-right and another right-to-left and
//! concatenates the two states per source position. The decoder starts
//! from a zero state, consumes the previous target token's embedding, and
//! attends bilinearly: score(s, enc_j) = s . (W_a enc_j), softmax over j,
//! context = sum of attention-weighted encoder states, output logits from
//! the projection of [s ; context].
//!
//! Backward passes are hand-derived; the finite-difference suite holds
//! them to the analytic gradients.

use crate::model::params::{GruWeights, Parameters};
use crate::model::tensor::{add_assign, axpy, dot};

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Softmax without normalization diagnostics; inputs are finite whenever
/// parameters are.
fn softmax(x: &[f64]) -> Vec<f64> {
    let max = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = x.iter().map(|&v| (v - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.iter().map(|&e| e / sum).collect()
}

pub(crate) fn log_softmax_vec(x: &[f64]) -> Vec<f64> {
    let max = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + x.iter().map(|&v| (v - max).exp()).sum::<f64>().ln();
    x.iter().map(|&v| v - lse).collect()
}

/// Everything the GRU backward pass needs from one forward step.
pub(crate) struct GruCache {
    x: Vec<f64>,
    h_prev: Vec<f64>,
    z: Vec<f64>,
    r: Vec<f64>,
    n: Vec<f64>,
    un_h: Vec<f64>,
}

fn gru_forward(w: &GruWeights, x: &[f64], h_prev: &[f64]) -> (Vec<f64>, GruCache) {
    let mut az = w.wz.matvec(x);
    add_assign(&mut az, &w.uz.matvec(h_prev));
    add_assign(&mut az, w.bz.data());
    let z: Vec<f64> = az.iter().map(|&a| sigmoid(a)).collect();

    let mut ar = w.wr.matvec(x);
    add_assign(&mut ar, &w.ur.matvec(h_prev));
    add_assign(&mut ar, w.br.data());
    let r: Vec<f64> = ar.iter().map(|&a| sigmoid(a)).collect();

    let un_h = w.un.matvec(h_prev);
    let mut an = w.wn.matvec(x);
    for ((a, &ri), (&ui, &bi)) in an.iter_mut().zip(&r).zip(un_h.iter().zip(w.bn.data())) {
        *a += ri * ui + bi;
    }
    let n: Vec<f64> = an.iter().map(|&a| a.tanh()).collect();

    let h: Vec<f64> = z
        .iter()
        .zip(&n)
        .zip(h_prev)
        .map(|((&zi, &ni), &hi)| (1.0 - zi) * ni + zi * hi)
        .collect();

    let cache = GruCache {
        x: x.to_vec(),
        h_prev: h_prev.to_vec(),
        z,
        r,
        n,
        un_h,
    };
    (h, cache)
}

/// Propagates `dh` through one cached step, accumulating weight gradients
/// into `grad`. Returns (dx, dh_prev).
pub(crate) fn gru_backward(
    w: &GruWeights,
    cache: &GruCache,
    dh: &[f64],
    grad: &mut GruWeights,
) -> (Vec<f64>, Vec<f64>) {
    let hidden = dh.len();
    let mut dh_prev = vec![0.0; hidden];
    let mut dan = vec![0.0; hidden];
    let mut dar = vec![0.0; hidden];
    let mut daz = vec![0.0; hidden];

    for i in 0..hidden {
        let z = cache.z[i];
        let r = cache.r[i];
        let n = cache.n[i];
        let dn = dh[i] * (1.0 - z);
        let dz = dh[i] * (cache.h_prev[i] - n);
        dh_prev[i] = dh[i] * z;
        dan[i] = dn * (1.0 - n * n);
        let dr = dan[i] * cache.un_h[i];
        dar[i] = dr * r * (1.0 - r);
        daz[i] = dz * z * (1.0 - z);
    }
    // d(Un h) = dan * r.
    let dun_h: Vec<f64> = dan.iter().zip(&cache.r).map(|(&d, &r)| d * r).collect();

    grad.wn.add_outer(&dan, &cache.x, 1.0);
    add_assign(grad.bn.data_mut(), &dan);
    grad.un.add_outer(&dun_h, &cache.h_prev, 1.0);
    add_assign(&mut dh_prev, &w.un.matvec_t(&dun_h));

    grad.wr.add_outer(&dar, &cache.x, 1.0);
    add_assign(grad.br.data_mut(), &dar);
    grad.ur.add_outer(&dar, &cache.h_prev, 1.0);
    add_assign(&mut dh_prev, &w.ur.matvec_t(&dar));

    grad.wz.add_outer(&daz, &cache.x, 1.0);
    add_assign(grad.bz.data_mut(), &daz);
    grad.uz.add_outer(&daz, &cache.h_prev, 1.0);
    add_assign(&mut dh_prev, &w.uz.matvec_t(&daz));

    let mut dx = w.wn.matvec_t(&dan);
    add_assign(&mut dx, &w.wr.matvec_t(&dar));
    add_assign(&mut dx, &w.wz.matvec_t(&daz));

    (dx, dh_prev)
}

/// Bidirectional encoder output: one concatenated state per source
/// position, plus per-step caches when requested.
pub(crate) struct EncoderPass {
    pub states: Vec<Vec<f64>>,
    fwd: Vec<GruCache>,
    bwd: Vec<GruCache>,
}

pub(crate) fn encode(params: &Parameters, src: &[u32], cached: bool) -> EncoderPass {
    let hidden = params.attn_w.rows();
    let len = src.len();

    let mut fwd_states = Vec::with_capacity(len);
    let mut fwd_caches = Vec::new();
    let mut h = vec![0.0; hidden];
    for &id in src {
        let (next, cache) = gru_forward(&params.enc_fwd, params.src_embed.row(id as usize), &h);
        if cached {
            fwd_caches.push(cache);
        }
        fwd_states.push(next.clone());
        h = next;
    }

    let mut bwd_states = vec![Vec::new(); len];
    let mut bwd_caches = Vec::with_capacity(if cached { len } else { 0 });
    let mut h = vec![0.0; hidden];
    for j in (0..len).rev() {
        let (next, cache) =
            gru_forward(&params.enc_bwd, params.src_embed.row(src[j] as usize), &h);
        if cached {
            bwd_caches.push(cache);
        }
        bwd_states[j] = next.clone();
        h = next;
    }
    if cached {
        // Collected from position len-1 down to 0; store per position.
        bwd_caches.reverse();
    }

    let states = fwd_states
        .into_iter()
        .zip(bwd_states)
        .map(|(f, b)| {
            let mut s = f;
            s.extend_from_slice(&b);
            s
        })
        .collect();

    EncoderPass {
        states,
        fwd: fwd_caches,
        bwd: bwd_caches,
    }
}

/// Backpropagates per-position state gradients through both encoder
/// directions, accumulating into `grad`.
pub(crate) fn encoder_backward(
    params: &Parameters,
    src: &[u32],
    pass: &EncoderPass,
    d_states: &[Vec<f64>],
    grad: &mut Parameters,
) {
    let hidden = params.attn_w.rows();
    let len = src.len();
    debug_assert_eq!(pass.fwd.len(), len, "encoder pass was not cached");

    // Forward direction: h_j depends on h_{j-1}; walk positions last to
    // first, carrying the recurrent gradient backward.
    let mut dh = vec![0.0; hidden];
    for j in (0..len).rev() {
        add_assign(&mut dh, &d_states[j][..hidden]);
        let (dx, dh_prev) = gru_backward(&params.enc_fwd, &pass.fwd[j], &dh, &mut grad.enc_fwd);
        axpy(grad.src_embed.row_mut(src[j] as usize), &dx, 1.0);
        dh = dh_prev;
    }

    // Backward direction: h_j depends on h_{j+1}; walk first to last.
    let mut dh = vec![0.0; hidden];
    for j in 0..len {
        add_assign(&mut dh, &d_states[j][hidden..]);
        let (dx, dh_next) = gru_backward(&params.enc_bwd, &pass.bwd[j], &dh, &mut grad.enc_bwd);
        axpy(grad.src_embed.row_mut(src[j] as usize), &dx, 1.0);
        dh = dh_next;
    }
}

/// Precomputed bilinear projections `P_j = W_a enc_j`, one per source
/// position, shared by every decoder step over the same source.
pub(crate) fn attention_projection(params: &Parameters, states: &[Vec<f64>]) -> Vec<Vec<f64>> {
    states.iter().map(|s| params.attn_w.matvec(s)).collect()
}

/// Intermediates of one decoder step, kept for the backward pass.
pub(crate) struct StepCache {
    gru: GruCache,
    s: Vec<f64>,
    alpha: Vec<f64>,
    context: Vec<f64>,
    pub log_probs: Vec<f64>,
    pub prev_token: u32,
}

/// One decoder step: consume the previous token, attend over the encoder
/// states, and produce the next-token log-distribution. Scoring, decoding,
/// and sampling all go through here.
pub(crate) fn decoder_step(
    params: &Parameters,
    enc_states: &[Vec<f64>],
    proj: &[Vec<f64>],
    prev_token: u32,
    h_prev: &[f64],
    cached: bool,
) -> (Vec<f64>, Vec<f64>, Option<StepCache>) {
    let hidden = h_prev.len();
    let x = params.tgt_embed.row(prev_token as usize);
    let (s, gru_cache) = gru_forward(&params.dec, x, h_prev);

    let scores: Vec<f64> = proj.iter().map(|p| dot(&s, p)).collect();
    let alpha = softmax(&scores);
    let mut context = vec![0.0; 2 * hidden];
    for (enc, &a) in enc_states.iter().zip(&alpha) {
        axpy(&mut context, enc, a);
    }

    let mut cat = Vec::with_capacity(3 * hidden);
    cat.extend_from_slice(&s);
    cat.extend_from_slice(&context);
    let mut logits = params.out_w.matvec(&cat);
    add_assign(&mut logits, params.out_b.data());
    let log_probs = log_softmax_vec(&logits);

    let cache = cached.then(|| StepCache {
        gru: gru_cache,
        s: s.clone(),
        alpha,
        context,
        log_probs: log_probs.clone(),
        prev_token,
    });
    (log_probs, s, cache)
}

/// Backward through one decoder step. `d_logits` is the loss gradient at
/// the pre-softmax output, `dh_out` the recurrent gradient arriving from
/// the following step. Accumulates into `grad` and the per-position
/// encoder state gradients; returns dh_prev.
#[allow(clippy::too_many_arguments)]
pub(crate) fn decoder_step_backward(
    params: &Parameters,
    enc_states: &[Vec<f64>],
    proj: &[Vec<f64>],
    cache: &StepCache,
    d_logits: &[f64],
    dh_out: &[f64],
    grad: &mut Parameters,
    d_enc: &mut [Vec<f64>],
) -> Vec<f64> {
    let hidden = cache.s.len();

    add_assign(grad.out_b.data_mut(), d_logits);
    let mut cat = Vec::with_capacity(3 * hidden);
    cat.extend_from_slice(&cache.s);
    cat.extend_from_slice(&cache.context);
    grad.out_w.add_outer(d_logits, &cat, 1.0);

    let d_cat = params.out_w.matvec_t(d_logits);
    let mut ds = d_cat[..hidden].to_vec();
    add_assign(&mut ds, dh_out);
    let d_context = &d_cat[hidden..];

    // context = sum_j alpha_j enc_j.
    let d_alpha: Vec<f64> = enc_states.iter().map(|enc| dot(d_context, enc)).collect();
    for (d, &a) in d_enc.iter_mut().zip(&cache.alpha) {
        axpy(d, d_context, a);
    }

    // Softmax over scores.
    let pivot: f64 = cache.alpha.iter().zip(&d_alpha).map(|(&a, &d)| a * d).sum();
    let d_scores: Vec<f64> = cache
        .alpha
        .iter()
        .zip(&d_alpha)
        .map(|(&a, &d)| a * (d - pivot))
        .collect();

    // score_j = s . P_j with P_j = W_a enc_j, so each position feeds back
    // through both the projection and the attention matrix itself.
    let wts = params.attn_w.matvec_t(&cache.s);
    for j in 0..proj.len() {
        let dsj = d_scores[j];
        if dsj != 0.0 {
            axpy(&mut ds, &proj[j], dsj);
            grad.attn_w.add_outer(&cache.s, &enc_states[j], dsj);
            axpy(&mut d_enc[j], &wts, dsj);
        }
    }

    let (dx, dh_prev) = gru_backward(&params.dec, &cache.gru, &ds, &mut grad.dec);
    axpy(
        grad.tgt_embed.row_mut(cache.prev_token as usize),
        &dx,
        1.0,
    );
    dh_prev
}
