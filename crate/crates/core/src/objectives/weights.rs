//! Self-normalized importance weights and the surrogate training loss.
//!
//! For each context, samples drawn from the proposal `q0` are scored with
//! raw log-weights `u_i = alpha*log_p_i + (1-alpha)*r_i/tau - log_q0_i` and
//! normalized with a softmax. The weighted negative log-likelihood
//! `-(1/|X|) sum_x sum_i w_i log p(y_i | x)` then descends the
//! alpha-divergence objective, with the weights treated as constants.

use crate::augment::AugmentedSample;
use crate::data::Sentence;
use crate::error::{Error, Result};
use crate::objectives::math::log_softmax;

/// Which training objective the weights realize.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObjectiveKind {
    /// Plain log-likelihood on the reference target; no sampling.
    Ml,
    /// Reward-augmented likelihood: weights from rewards only (alpha = 0).
    Raml,
    /// Alpha-divergence minimization with alpha in [0, 1).
    AlphaDimt,
}

impl ObjectiveKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "ml" => Ok(ObjectiveKind::Ml),
            "raml" => Ok(ObjectiveKind::Raml),
            "alpha_dimt" => Ok(ObjectiveKind::AlphaDimt),
            other => Err(Error::config(format!(
                "unknown objective kind '{other}' (expected ml, raml, or alpha_dimt)"
            ))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ObjectiveKind::Ml => "ml",
            ObjectiveKind::Raml => "raml",
            ObjectiveKind::AlphaDimt => "alpha_dimt",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveConfig {
    pub kind: ObjectiveKind,
    /// Interpolation parameter in [0, 1). Ignored by `ml`; must be 0 for
    /// `raml`, which is the alpha = 0 member of the family.
    pub alpha: f64,
    /// Reward temperature, > 0.
    pub tau: f64,
}

impl Default for ObjectiveConfig {
    fn default() -> Self {
        ObjectiveConfig {
            kind: ObjectiveKind::AlphaDimt,
            alpha: 0.5,
            tau: 3.0,
        }
    }
}

impl ObjectiveConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau.is_finite() && self.tau > 0.0) {
            return Err(Error::config(format!("objective.tau must be > 0, got {}", self.tau)));
        }
        if !(self.alpha.is_finite() && (0.0..1.0).contains(&self.alpha)) {
            return Err(Error::config(format!(
                "objective.alpha must lie in [0, 1), got {}",
                self.alpha
            )));
        }
        if self.kind == ObjectiveKind::Raml && self.alpha != 0.0 {
            return Err(Error::config(format!(
                "objective.alpha must be 0 for raml, got {}",
                self.alpha
            )));
        }
        Ok(())
    }

    /// The alpha actually used for weighting. `raml` is the alpha = 0
    /// member of the family; `ml` never weights against the model either
    /// (its single sample always gets weight 1), so both pin alpha to 0.
    pub fn effective_alpha(&self) -> f64 {
        match self.kind {
            ObjectiveKind::Ml | ObjectiveKind::Raml => 0.0,
            ObjectiveKind::AlphaDimt => self.alpha,
        }
    }
}

/// Raw log-weight of one sample before per-context normalization.
///
/// At alpha = 0 the model term is dropped from the expression entirely, not
/// multiplied by zero, so the result is bit-identical across models and no
/// model evaluation is needed; `log_p` may then be `None`.
pub fn raw_log_weight(
    log_p: Option<f64>,
    reward: f64,
    log_q0: f64,
    cfg: &ObjectiveConfig,
) -> Result<f64> {
    cfg.validate()?;
    if !reward.is_finite() {
        return Err(Error::non_finite(format!("sample reward {reward}")));
    }
    if !log_q0.is_finite() {
        return Err(Error::non_finite(format!("sample log_q0 {log_q0}")));
    }
    let alpha = cfg.effective_alpha();
    if alpha == 0.0 {
        return Ok(reward / cfg.tau - log_q0);
    }
    match log_p {
        Some(lp) if lp.is_finite() => Ok(alpha * lp + (1.0 - alpha) * (reward / cfg.tau) - log_q0),
        Some(lp) => Err(Error::non_finite(format!("sample log_p {lp}"))),
        None => Err(Error::domain(format!(
            "alpha = {alpha} requires model log-probabilities for weighting"
        ))),
    }
}

/// Softmax over one context's raw log-weights.
pub fn normalize_log_weights(raw: &[f64]) -> Result<Vec<f64>> {
    if raw.is_empty() {
        return Err(Error::domain("no samples to normalize weights over"));
    }
    let log_weights = log_softmax(raw)?;
    Ok(log_weights.iter().map(|&lw| lw.exp()).collect())
}

/// One sample with its weighting intermediates, for training and inspection.
#[derive(Debug, Clone)]
pub struct WeightedSample {
    pub sample: AugmentedSample,
    /// Model log-probability under the weighting parameters; `None` at
    /// alpha = 0 where it is not consulted.
    pub log_p: Option<f64>,
    pub raw_log_weight: f64,
    /// Normalized weight; sums to 1 over the context.
    pub weight: f64,
}

/// All weighted samples sharing one source context.
#[derive(Debug, Clone)]
pub struct WeightedContext {
    pub pair_id: usize,
    pub source: Sentence,
    pub samples: Vec<WeightedSample>,
}

/// A batch of weighted contexts ready for a gradient step.
#[derive(Debug, Clone)]
pub struct WeightedBatch {
    pub contexts: Vec<WeightedContext>,
}

/// Samples for one context, scored but not yet weighted. `log_p` entries
/// are required whenever the effective alpha is positive.
#[derive(Debug, Clone)]
pub struct ScoredContext {
    pub pair_id: usize,
    pub source: Sentence,
    pub samples: Vec<(AugmentedSample, Option<f64>)>,
}

/// Computes raw log-weights and per-context softmax weights for a batch.
pub fn weight_batch(contexts: Vec<ScoredContext>, cfg: &ObjectiveConfig) -> Result<WeightedBatch> {
    cfg.validate()?;
    let mut weighted = Vec::with_capacity(contexts.len());
    for ctx in contexts {
        let raw: Vec<f64> = ctx
            .samples
            .iter()
            .map(|(s, log_p)| raw_log_weight(*log_p, s.reward, s.log_q0, cfg))
            .collect::<Result<_>>()?;
        let weights = normalize_log_weights(&raw).map_err(|e| {
            Error::domain(format!("weights for pair {}: {e}", ctx.pair_id))
        })?;
        let samples = ctx
            .samples
            .into_iter()
            .zip(raw)
            .zip(weights)
            .map(|(((sample, log_p), raw_log_weight), weight)| WeightedSample {
                sample,
                log_p,
                raw_log_weight,
                weight,
            })
            .collect();
        weighted.push(WeightedContext {
            pair_id: ctx.pair_id,
            source: ctx.source,
            samples,
        });
    }
    Ok(WeightedBatch { contexts: weighted })
}

/// Surrogate loss `-(1/|X|) sum_x sum_i w_i log p(y_i | x)` given fresh
/// model log-probabilities, one inner vector per context in batch order.
/// The weights are constants here; only `log_probs` carries gradient.
pub fn surrogate_loss(batch: &WeightedBatch, log_probs: &[Vec<f64>]) -> Result<f64> {
    if log_probs.len() != batch.contexts.len() {
        return Err(Error::domain(format!(
            "log_probs for {} contexts, batch has {}",
            log_probs.len(),
            batch.contexts.len()
        )));
    }
    let mut total = 0.0;
    for (ctx, lps) in batch.contexts.iter().zip(log_probs) {
        if lps.len() != ctx.samples.len() {
            return Err(Error::domain(format!(
                "pair {}: {} log-probs for {} samples",
                ctx.pair_id,
                lps.len(),
                ctx.samples.len()
            )));
        }
        for (sample, &lp) in ctx.samples.iter().zip(lps) {
            if !lp.is_finite() {
                return Err(Error::non_finite(format!(
                    "log-probability {lp} for pair {}",
                    ctx.pair_id
                )));
            }
            total -= sample.weight * lp;
        }
    }
    let loss = total / batch.contexts.len() as f64;
    if !loss.is_finite() {
        return Err(Error::non_finite(format!("surrogate loss {loss}")));
    }
    Ok(loss)
}
