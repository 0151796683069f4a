//! Reward functions: negative Hamming distance for augmentation weighting
//! and corpus-level BLEU for evaluation.

use std::collections::HashMap;

use crate::data::Sentence;
use crate::error::{Error, Result};

/// Highest n-gram order entering the BLEU geometric mean.
pub const BLEU_MAX_N: usize = 4;

/// A scalar reward. Always finite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reward(f64);

impl Reward {
    pub fn new(value: f64) -> Result<Self> {
        if !value.is_finite() {
            return Err(Error::non_finite(format!("reward {value}")));
        }
        Ok(Reward(value))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// A sentence-pair reward `r(y, y*)`. Augmentation and the oracle objectives
/// accept any implementation; training uses [`HammingReward`].
pub trait RewardFn {
    fn reward(&self, y: &Sentence, y_star: &Sentence) -> Result<Reward>;
}

/// Negative Hamming distance between equal-length sentences.
#[derive(Debug, Clone, Copy, Default)]
pub struct HammingReward;

impl RewardFn for HammingReward {
    fn reward(&self, y: &Sentence, y_star: &Sentence) -> Result<Reward> {
        hamming_reward(y, y_star)
    }
}

/// `-(number of positions where y and y* differ)`. The sentences must have
/// equal length; Hamming distance is undefined otherwise.
pub fn hamming_reward(y: &Sentence, y_star: &Sentence) -> Result<Reward> {
    if y.len() != y_star.len() {
        return Err(Error::domain(format!(
            "hamming reward needs equal lengths, got {} vs {}",
            y.len(),
            y_star.len()
        )));
    }
    let distance = y
        .ids()
        .iter()
        .zip(y_star.ids())
        .filter(|(a, b)| a != b)
        .count();
    Reward::new(-(distance as f64))
}

fn ngram_counts(ids: &[u32], n: usize) -> HashMap<&[u32], usize> {
    let mut counts = HashMap::new();
    if ids.len() >= n {
        for window in ids.windows(n) {
            *counts.entry(window).or_insert(0) += 1;
        }
    }
    counts
}

/// Corpus-level BLEU with modified n-gram precisions up to order 4, geometric
/// mean, and brevity penalty `exp(1 - ref_len/hyp_len)` applied when the
/// corpus hypothesis length does not exceed the reference length. No
/// smoothing: any zero corpus-level precision yields a score of 0. Orders
/// longer than every hypothesis contribute no counts and are skipped.
/// Returned scores are scaled to [0, 100].
pub fn corpus_bleu(hypotheses: &[Sentence], references: &[Sentence]) -> Result<f64> {
    if hypotheses.len() != references.len() {
        return Err(Error::domain(format!(
            "hypothesis/reference count mismatch: {} vs {}",
            hypotheses.len(),
            references.len()
        )));
    }
    if hypotheses.is_empty() {
        return Err(Error::domain("BLEU over an empty corpus"));
    }

    let mut matched = [0usize; BLEU_MAX_N];
    let mut total = [0usize; BLEU_MAX_N];
    let mut hyp_len = 0usize;
    let mut ref_len = 0usize;

    for (hyp, reference) in hypotheses.iter().zip(references) {
        hyp_len += hyp.len();
        ref_len += reference.len();
        for n in 1..=BLEU_MAX_N {
            if hyp.len() < n {
                continue;
            }
            let hyp_counts = ngram_counts(hyp.ids(), n);
            let ref_counts = ngram_counts(reference.ids(), n);
            for (gram, &count) in &hyp_counts {
                total[n - 1] += count;
                matched[n - 1] += count.min(ref_counts.get(gram).copied().unwrap_or(0));
            }
        }
    }

    if hyp_len == 0 {
        return Ok(0.0);
    }

    let mut log_precision_sum = 0.0;
    for n in 0..BLEU_MAX_N {
        if total[n] == 0 {
            continue;
        }
        if matched[n] == 0 {
            return Ok(0.0);
        }
        log_precision_sum += (matched[n] as f64 / total[n] as f64).ln();
    }

    let brevity = if hyp_len > ref_len {
        1.0
    } else {
        (1.0 - ref_len as f64 / hyp_len as f64).exp()
    };
    Ok(100.0 * brevity * (log_precision_sum / BLEU_MAX_N as f64).exp())
}
