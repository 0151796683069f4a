//! Greedy, beam, and ancestral decoding. All three walk the same decoder
//! step the scorer uses, so a decoded hypothesis' probability is exactly
//! what `log_prob` reports for it.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::data::{Sentence, BOS_ID, EOS_ID, PAD_ID};
use crate::error::{Error, Result};
use crate::model::net::{attention_projection, decoder_step, encode};
use crate::model::params::{ModelConfig, Parameters};

struct DecodeContext {
    enc_states: Vec<Vec<f64>>,
    proj: Vec<Vec<f64>>,
    hidden: usize,
}

fn prepare(params: &Parameters, x: &Sentence) -> Result<DecodeContext> {
    let src: Vec<u32> = x
        .ids()
        .iter()
        .copied()
        .filter(|&id| id != PAD_ID)
        .collect();
    if src.is_empty() {
        return Err(Error::data("cannot decode from an empty source".to_string()));
    }
    for &id in &src {
        if id as usize >= params.src_embed.rows() {
            return Err(Error::data(format!(
                "source token id {id} outside vocabulary of {}",
                params.src_embed.rows()
            )));
        }
    }
    let enc = encode(params, &src, false);
    let proj = attention_projection(params, &enc.states);
    Ok(DecodeContext {
        enc_states: enc.states,
        proj,
        hidden: params.attn_w.rows(),
    })
}

/// Padding and BOS are never emitted; EOS is withheld on the first step so
/// decodes are nonempty.
fn emittable(token: u32, step: usize) -> bool {
    token != PAD_ID && token != BOS_ID && (token != EOS_ID || step > 0)
}

/// Argmax token per step until EOS or the configured length cap. Ties
/// break toward the lowest token id.
pub fn greedy_decode(params: &Parameters, config: &ModelConfig, x: &Sentence) -> Result<Sentence> {
    let ctx = prepare(params, x)?;
    let mut h = vec![0.0; ctx.hidden];
    let mut prev = BOS_ID;
    let mut out = Vec::new();
    for step in 0..config.max_decode_len {
        let (log_probs, state, _) =
            decoder_step(params, &ctx.enc_states, &ctx.proj, prev, &h, false);
        let mut best: Option<(u32, f64)> = None;
        for (v, &lp) in log_probs.iter().enumerate() {
            let token = v as u32;
            if !emittable(token, step) {
                continue;
            }
            if best.map_or(true, |(_, b)| lp > b) {
                best = Some((token, lp));
            }
        }
        let (token, _) = best.expect("vocabulary has emittable tokens");
        if token == EOS_ID {
            break;
        }
        out.push(token);
        prev = token;
        h = state;
    }
    Ok(Sentence::new(out))
}

struct Hypothesis {
    tokens: Vec<u32>,
    score: f64,
    h: Vec<f64>,
    prev: u32,
}

/// Beam search over cumulative log-probability. Hypotheses retire to a
/// completed pool when they emit EOS; the highest-scoring completed
/// hypothesis wins, falling back to the best live prefix if nothing
/// completed within the length cap. `beam_decode(.., 1, ..)` follows
/// exactly the greedy path, including tie-breaking.
pub fn beam_decode(
    params: &Parameters,
    config: &ModelConfig,
    x: &Sentence,
    beam: usize,
) -> Result<Sentence> {
    if beam < 1 {
        return Err(Error::config("beam width must be at least 1".to_string()));
    }
    let ctx = prepare(params, x)?;
    let mut live = vec![Hypothesis {
        tokens: Vec::new(),
        score: 0.0,
        h: vec![0.0; ctx.hidden],
        prev: BOS_ID,
    }];
    let mut completed: Vec<(Vec<u32>, f64)> = Vec::new();

    for step in 0..config.max_decode_len {
        let mut states = Vec::with_capacity(live.len());
        let mut candidates: Vec<(f64, u32, usize)> = Vec::new();
        for (parent, hyp) in live.iter().enumerate() {
            let (log_probs, state, _) =
                decoder_step(params, &ctx.enc_states, &ctx.proj, hyp.prev, &hyp.h, false);
            states.push(state);
            for (v, &lp) in log_probs.iter().enumerate() {
                let token = v as u32;
                if emittable(token, step) {
                    candidates.push((hyp.score + lp, token, parent));
                }
            }
        }
        candidates.sort_by(|a, b| {
            b.0.total_cmp(&a.0)
                .then_with(|| a.1.cmp(&b.1))
                .then_with(|| a.2.cmp(&b.2))
        });

        let mut next = Vec::with_capacity(beam);
        for &(score, token, parent) in candidates.iter().take(beam) {
            if token == EOS_ID {
                completed.push((live[parent].tokens.clone(), score));
            } else {
                let mut tokens = live[parent].tokens.clone();
                tokens.push(token);
                next.push(Hypothesis {
                    tokens,
                    score,
                    h: states[parent].clone(),
                    prev: token,
                });
            }
        }
        live = next;
        if live.is_empty() {
            break;
        }
    }

    let best_completed = completed
        .into_iter()
        .max_by(|a, b| a.1.total_cmp(&b.1).then_with(|| b.0.cmp(&a.0)));
    match best_completed {
        Some((tokens, _)) => Ok(Sentence::new(tokens)),
        // Candidates were taken in sorted order, so the first live
        // hypothesis is the best prefix.
        None => Ok(Sentence::new(
            live.first().map(|h| h.tokens.clone()).unwrap_or_default(),
        )),
    }
}

/// Samples from the raw per-step softmax, with no masking, until EOS or
/// the length cap. Diagnostics only; deterministic given the rng state.
pub fn ancestral_sample(
    params: &Parameters,
    config: &ModelConfig,
    x: &Sentence,
    rng: &mut ChaCha8Rng,
) -> Result<Sentence> {
    let ctx = prepare(params, x)?;
    let mut h = vec![0.0; ctx.hidden];
    let mut prev = BOS_ID;
    let mut out = Vec::new();
    for _ in 0..config.max_decode_len {
        let (log_probs, state, _) =
            decoder_step(params, &ctx.enc_states, &ctx.proj, prev, &h, false);
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        let mut token = (log_probs.len() - 1) as u32;
        for (v, &lp) in log_probs.iter().enumerate() {
            acc += lp.exp();
            if u < acc {
                token = v as u32;
                break;
            }
        }
        if token == EOS_ID {
            break;
        }
        out.push(token);
        prev = token;
        h = state;
    }
    Ok(Sentence::new(out))
}
