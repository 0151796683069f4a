//! Teacher-forced scoring and exact gradients of the weighted
//! negative log-likelihood.

use crate::data::{Sentence, BOS_ID, EOS_ID, PAD_ID};
use crate::error::{Error, Result};
use crate::model::net::{
    attention_projection, decoder_step, decoder_step_backward, encode, encoder_backward,
    EncoderPass, StepCache,
};
use crate::model::params::{GradientEstimate, Parameters};
use crate::objectives::{surrogate_loss, WeightedBatch};

/// Drops trailing padding; scores and decodes must not see it.
fn strip_pad(ids: &[u32]) -> &[u32] {
    let end = ids
        .iter()
        .rposition(|&id| id != PAD_ID)
        .map_or(0, |i| i + 1);
    &ids[..end]
}

fn validate_ids(ids: &[u32], vocab: usize, side: &str) -> Result<()> {
    for &id in ids {
        if id as usize >= vocab {
            return Err(Error::data(format!(
                "{side} token id {id} outside vocabulary of {vocab}"
            )));
        }
    }
    Ok(())
}

/// Teacher-forced forward pass over one pair, with everything the backward
/// pass needs retained.
pub(crate) struct SequenceCache {
    src: Vec<u32>,
    tgt_out: Vec<u32>,
    enc: EncoderPass,
    proj: Vec<Vec<f64>>,
    steps: Vec<StepCache>,
}

/// A scored (source, target) pair whose gradient can be accumulated later
/// without re-running the forward pass.
pub struct ScoredSequence {
    total: f64,
    per_token: Vec<f64>,
    cache: SequenceCache,
}

impl ScoredSequence {
    /// `log p(y | x)` including the terminal EOS step.
    pub fn total(&self) -> f64 {
        self.total
    }

    /// One log-probability per target token, the EOS step last.
    pub fn per_token(&self) -> &[f64] {
        &self.per_token
    }
}

/// Runs the encoder and the teacher-forced decoder over `(x, y)`, caching
/// all intermediates.
pub fn forward_cached(params: &Parameters, x: &Sentence, y: &Sentence) -> Result<ScoredSequence> {
    let src = strip_pad(x.ids());
    let tgt = strip_pad(y.ids());
    if src.is_empty() {
        return Err(Error::data("cannot score against an empty source".to_string()));
    }
    validate_ids(src, params.src_embed.rows(), "source")?;
    validate_ids(tgt, params.tgt_embed.rows(), "target")?;

    let enc = encode(params, src, true);
    let proj = attention_projection(params, &enc.states);

    let mut tgt_in = Vec::with_capacity(tgt.len() + 1);
    tgt_in.push(BOS_ID);
    tgt_in.extend_from_slice(tgt);
    let mut tgt_out = Vec::with_capacity(tgt.len() + 1);
    tgt_out.extend_from_slice(tgt);
    tgt_out.push(EOS_ID);

    let hidden = params.attn_w.rows();
    let mut h = vec![0.0; hidden];
    let mut steps = Vec::with_capacity(tgt_in.len());
    let mut per_token = Vec::with_capacity(tgt_in.len());
    for (&prev, &observed) in tgt_in.iter().zip(&tgt_out) {
        let (log_probs, state, cache) = decoder_step(params, &enc.states, &proj, prev, &h, true);
        per_token.push(log_probs[observed as usize]);
        steps.push(cache.expect("cached step"));
        h = state;
    }
    let total = per_token.iter().sum();

    Ok(ScoredSequence {
        total,
        per_token,
        cache: SequenceCache {
            src: src.to_vec(),
            tgt_out,
            enc,
            proj,
            steps,
        },
    })
}

/// `log p(y | x)` under teacher forcing: the summed log-probability of
/// every target token plus the terminal EOS, and the per-token values.
pub fn log_prob(params: &Parameters, x: &Sentence, y: &Sentence) -> Result<(f64, Vec<f64>)> {
    let scored = forward_cached(params, x, y)?;
    Ok((scored.total, scored.per_token))
}

/// The full next-token log-distribution at every teacher-forced step; row
/// `t` conditions on `y_{<t}` (the EOS step last). Probe for normalization
/// and consistency checks.
pub fn step_log_distributions(
    params: &Parameters,
    x: &Sentence,
    y: &Sentence,
) -> Result<Vec<Vec<f64>>> {
    let scored = forward_cached(params, x, y)?;
    Ok(scored
        .cache
        .steps
        .into_iter()
        .map(|s| s.log_probs)
        .collect())
}

/// Adds `weight * d(-log p(y|x))/d theta` to `grad`. A zero weight
/// contributes exactly nothing.
pub fn accumulate_gradient(
    params: &Parameters,
    scored: &ScoredSequence,
    weight: f64,
    grad: &mut GradientEstimate,
) {
    if weight == 0.0 {
        return;
    }
    let cache = &scored.cache;
    let hidden = params.attn_w.rows();
    let mut d_enc = vec![vec![0.0; 2 * hidden]; cache.src.len()];
    let mut dh = vec![0.0; hidden];

    for (step, &observed) in cache.steps.iter().zip(&cache.tgt_out).rev() {
        // d(-w log p[observed])/d logits = w * (softmax - onehot).
        let mut d_logits: Vec<f64> = step.log_probs.iter().map(|&lp| weight * lp.exp()).collect();
        d_logits[observed as usize] -= weight;
        dh = decoder_step_backward(
            params,
            &cache.enc.states,
            &cache.proj,
            step,
            &d_logits,
            &dh,
            grad.grads_mut(),
            &mut d_enc,
        );
    }
    // dh now holds the gradient at the fixed zero initial state.
    encoder_backward(params, &cache.src, &cache.enc, &d_enc, grad.grads_mut());
}

/// Loss and exact gradient of the surrogate
/// `-(1/|X|) sum_x sum_i w_i log p(y_i | x)` with the weights frozen.
pub fn grad_weighted_nll(
    params: &Parameters,
    batch: &WeightedBatch,
) -> Result<(f64, GradientEstimate)> {
    if batch.contexts.is_empty() {
        return Err(Error::domain("gradient of an empty batch".to_string()));
    }
    let scale = 1.0 / batch.contexts.len() as f64;
    let mut grad = GradientEstimate::zeros_like(params);
    let mut log_probs = Vec::with_capacity(batch.contexts.len());
    for ctx in &batch.contexts {
        let mut lps = Vec::with_capacity(ctx.samples.len());
        for sample in &ctx.samples {
            let scored = forward_cached(params, &ctx.source, &sample.sample.y_tilde)?;
            accumulate_gradient(params, &scored, sample.weight * scale, &mut grad);
            lps.push(scored.total());
        }
        log_probs.push(lps);
    }
    let loss = surrogate_loss(batch, &log_probs)?;
    grad.check_finite()?;
    Ok((loss, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::augment::AugmentedSample;
    use crate::model::params::ModelConfig;
    use crate::objectives::{weight_batch, ObjectiveConfig, ObjectiveKind, ScoredContext};

    fn tiny_config() -> ModelConfig {
        let mut c = ModelConfig::new(8, 8);
        c.embed_dim = 3;
        c.hidden_dim = 4;
        c.max_decode_len = 8;
        c.seed = 5;
        c
    }

    fn sent(ids: &[u32]) -> Sentence {
        Sentence::new(ids.to_vec())
    }

    #[test]
    fn log_prob_is_negative_pure_and_sums_per_token() {
        let params = Parameters::init(&tiny_config()).unwrap();
        let x = sent(&[3, 4, 5]);
        let y = sent(&[5, 4]);
        let (total, per_token) = log_prob(&params, &x, &y).unwrap();
        assert!(total < 0.0);
        assert_eq!(per_token.len(), 3);
        assert_eq!(total, per_token.iter().sum::<f64>());
        let (again, _) = log_prob(&params, &x, &y).unwrap();
        assert_eq!(total.to_bits(), again.to_bits());
    }

    #[test]
    fn step_distributions_normalize_and_match_per_token() {
        let params = Parameters::init(&tiny_config()).unwrap();
        let x = sent(&[3, 4, 5, 6]);
        let y = sent(&[6, 5, 4]);
        let dists = step_log_distributions(&params, &x, &y).unwrap();
        assert_eq!(dists.len(), 4);
        for row in &dists {
            let mass: f64 = row.iter().map(|&lp| lp.exp()).sum();
            assert!((mass - 1.0).abs() < 1e-12, "step mass {mass}");
        }
        let (_, per_token) = log_prob(&params, &x, &y).unwrap();
        let observed = [6usize, 5, 4, EOS_ID as usize];
        for (t, &tok) in observed.iter().enumerate() {
            assert_eq!(per_token[t].to_bits(), dists[t][tok].to_bits());
        }
    }

    #[test]
    fn trailing_padding_is_invisible() {
        let params = Parameters::init(&tiny_config()).unwrap();
        let x = sent(&[3, 4, 5]);
        let y = sent(&[5, 4]);
        let x_padded = sent(&[3, 4, 5, PAD_ID, PAD_ID]);
        let y_padded = sent(&[5, 4, PAD_ID]);
        let (a, _) = log_prob(&params, &x, &y).unwrap();
        let (b, _) = log_prob(&params, &x_padded, &y_padded).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn rejects_empty_source_and_foreign_tokens() {
        let params = Parameters::init(&tiny_config()).unwrap();
        assert!(log_prob(&params, &sent(&[]), &sent(&[3])).is_err());
        assert!(log_prob(&params, &sent(&[PAD_ID, PAD_ID]), &sent(&[3])).is_err());
        assert!(log_prob(&params, &sent(&[3, 99]), &sent(&[3])).is_err());
        assert!(log_prob(&params, &sent(&[3]), &sent(&[99])).is_err());
    }

    fn ml_batch(contexts: &[(Sentence, Sentence)]) -> WeightedBatch {
        let cfg = ObjectiveConfig {
            kind: ObjectiveKind::Ml,
            alpha: 0.0,
            tau: 1.0,
        };
        let scored: Vec<ScoredContext> = contexts
            .iter()
            .enumerate()
            .map(|(i, (x, y))| ScoredContext {
                pair_id: i,
                source: x.clone(),
                samples: vec![(
                    AugmentedSample {
                        pair_id: i,
                        y_tilde: y.clone(),
                        e: 0,
                        reward: 0.0,
                        log_q0: 0.0,
                    },
                    None,
                )],
            })
            .collect();
        weight_batch(scored, &cfg).unwrap()
    }

    #[test]
    fn ml_batch_loss_is_mean_nll() {
        let params = Parameters::init(&tiny_config()).unwrap();
        let pairs = vec![
            (sent(&[3, 4]), sent(&[4, 3])),
            (sent(&[5, 6, 7]), sent(&[7, 6, 5])),
        ];
        let batch = ml_batch(&pairs);
        let (loss, _) = grad_weighted_nll(&params, &batch).unwrap();
        let nll: f64 = pairs
            .iter()
            .map(|(x, y)| -log_prob(&params, x, y).unwrap().0)
            .sum::<f64>()
            / pairs.len() as f64;
        assert!((loss - nll).abs() < 1e-15, "{loss} vs {nll}");
    }

    #[test]
    fn zero_weights_give_exactly_zero_gradient() {
        let params = Parameters::init(&tiny_config()).unwrap();
        let mut batch = ml_batch(&[(sent(&[3, 4]), sent(&[4]))]);
        batch.contexts[0].samples[0].weight = 0.0;
        let mut grad = GradientEstimate::zeros_like(&params);
        let scored = forward_cached(&params, &sent(&[3, 4]), &sent(&[4])).unwrap();
        accumulate_gradient(&params, &scored, 0.0, &mut grad);
        for (name, t) in grad.tensors() {
            assert!(t.data().iter().all(|&v| v == 0.0), "nonzero in {name}");
        }
    }

    // The full per-parameter finite-difference comparison lives in the
    // acceptance suite; this guards the backward pass during development
    // with the same tolerances.
    #[test]
    fn gradient_matches_finite_differences() {
        let mut cfg = tiny_config();
        // At the production init scale the reset-gate gradients sit below
        // the central-difference noise floor (~5e-11 for a loss of this
        // magnitude), so the relative comparison would measure rounding
        // noise rather than the backward pass. Larger weights keep every
        // coordinate well above that floor.
        cfg.init_scale = 0.5;
        let params = Parameters::init(&cfg).unwrap();
        let contexts = vec![
            ScoredContext {
                pair_id: 0,
                source: sent(&[3, 4, 5]),
                samples: vec![
                    (
                        AugmentedSample {
                            pair_id: 0,
                            y_tilde: sent(&[5, 4]),
                            e: 0,
                            reward: 0.0,
                            log_q0: -1.0,
                        },
                        Some(-2.0),
                    ),
                    (
                        AugmentedSample {
                            pair_id: 0,
                            y_tilde: sent(&[5, 3]),
                            e: 1,
                            reward: -1.0,
                            log_q0: -1.5,
                        },
                        Some(-3.0),
                    ),
                ],
            },
            ScoredContext {
                pair_id: 1,
                source: sent(&[6, 7]),
                samples: vec![(
                    AugmentedSample {
                        pair_id: 1,
                        y_tilde: sent(&[7, 6, 3]),
                        e: 0,
                        reward: 0.0,
                        log_q0: -0.5,
                    },
                    Some(-1.0),
                )],
            },
        ];
        let ocfg = ObjectiveConfig {
            kind: ObjectiveKind::AlphaDimt,
            alpha: 0.5,
            tau: 3.0,
        };
        let batch = weight_batch(contexts, &ocfg).unwrap();
        let (_, grad) = grad_weighted_nll(&params, &batch).unwrap();

        let loss_of = |p: &Parameters| -> f64 {
            let lps: Vec<Vec<f64>> = batch
                .contexts
                .iter()
                .map(|ctx| {
                    ctx.samples
                        .iter()
                        .map(|s| forward_cached(p, &ctx.source, &s.sample.y_tilde).unwrap().total())
                        .collect()
                })
                .collect();
            surrogate_loss(&batch, &lps).unwrap()
        };

        let h = 1e-5;
        let mut worst: (f64, String) = (0.0, String::new());
        let names: Vec<String> = params.tensors().into_iter().map(|(n, _)| n).collect();
        for (t_idx, name) in names.iter().enumerate() {
            let len = params.tensors()[t_idx].1.len();
            for k in 0..len {
                let mut hi = params.clone();
                hi.tensors_mut()[t_idx].1.data_mut()[k] += h;
                let mut lo = params.clone();
                lo.tensors_mut()[t_idx].1.data_mut()[k] -= h;
                let numeric = (loss_of(&hi) - loss_of(&lo)) / (2.0 * h);
                let analytic = grad.tensors()[t_idx].1.data()[k];
                let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8);
                if rel > worst.0 {
                    worst = (
                        rel,
                        format!("{name}[{k}] analytic {analytic} vs numeric {numeric}"),
                    );
                }
            }
        }
        assert!(
            worst.0 <= 1e-4,
            "worst relative error {} at {}",
            worst.0,
            worst.1
        );
    }
}
