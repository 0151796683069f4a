//! Hamming-ball data augmentation.
//!
//! Each training pair's target `y*` is perturbed by substituting up to
//! `E = floor(0.2 * m)` positions. The proposal `q0` first draws the edit
//! count `e` uniformly from `{0..E}`, then `e` distinct positions uniformly,
//! then a replacement per position uniformly over the `V - 1` content tokens
//! other than the original. Its density is therefore exactly
//! `1/(E+1) * 1/C(m,e) * 1/(V-1)^e`, which importance weighting needs in
//! closed form.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::Rng;

use crate::data::{ParallelCorpus, Sentence, Vocab};
use crate::error::{Error, Result};
use crate::rewards::{hamming_reward, RewardFn};
use crate::rng::{pack_pair_epoch, stream_rng, StreamKind};

/// Fraction of target positions eligible for substitution.
pub const EDIT_FRACTION: f64 = 0.2;

/// Largest Hamming ball `enumerate_ball` will materialize by default.
pub const DEFAULT_BALL_CAP: usize = 200_000;

/// Augmentation settings. `tau` is the payoff temperature the samples are
/// destined for (recorded alongside them; the weighting math reads it from
/// the objective settings), `samples_per_pair` is K.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentConfig {
    pub tau: f64,
    pub samples_per_pair: usize,
    pub edit_fraction: f64,
    pub seed: u64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        AugmentConfig {
            tau: 3.0,
            samples_per_pair: 8,
            edit_fraction: EDIT_FRACTION,
            seed: 0,
        }
    }
}

impl AugmentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau.is_finite() && self.tau > 0.0) {
            return Err(Error::config(format!("augment.tau must be positive, got {}", self.tau)));
        }
        if self.samples_per_pair == 0 {
            return Err(Error::config("augment.samples_per_pair must be at least 1"));
        }
        if (self.edit_fraction - EDIT_FRACTION).abs() > 1e-12 {
            return Err(Error::config(format!(
                "augment.edit_fraction is fixed at {EDIT_FRACTION}; the closed-form \
                 proposal density assumes it (got {})",
                self.edit_fraction
            )));
        }
        Ok(())
    }
}

/// One proposal draw for a pair: the perturbed target, its edit count, the
/// reward against `y*`, and the exact proposal log-density.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedSample {
    pub pair_id: usize,
    pub y_tilde: Sentence,
    pub e: usize,
    pub reward: f64,
    pub log_q0: f64,
}

/// Maximum number of edited positions for a target of length `m`.
pub fn max_edits(m: usize) -> usize {
    m / 5
}

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut result: u128 = 1;
    for i in 0..k {
        result = result * (n - i) as u128 / (i + 1) as u128;
    }
    result
}

fn content_vocab_size(vocab: &Vocab) -> Result<usize> {
    let v = vocab.content_len();
    if v < 2 {
        return Err(Error::domain(
            "augmentation needs at least 2 content tokens to substitute",
        ));
    }
    Ok(v)
}

fn log_q0_value(m: usize, e: usize, v: usize) -> f64 {
    let e_max = max_edits(m);
    -((e_max + 1) as f64).ln() - (binomial(m, e) as f64).ln() - (e as f64) * ((v - 1) as f64).ln()
}

/// Exact `ln q0(y_tilde | y*)` for a candidate inside the proposal's support.
/// Errors when the lengths differ or the edit count exceeds `max_edits`.
pub fn log_q0(y_tilde: &Sentence, y_star: &Sentence, vocab: &Vocab) -> Result<f64> {
    if y_tilde.len() != y_star.len() {
        return Err(Error::domain(format!(
            "proposal support holds equal-length sentences only ({} vs {})",
            y_tilde.len(),
            y_star.len()
        )));
    }
    let e = y_tilde
        .ids()
        .iter()
        .zip(y_star.ids())
        .filter(|(a, b)| a != b)
        .count();
    let m = y_star.len();
    let e_max = max_edits(m);
    if e > e_max {
        return Err(Error::domain(format!(
            "candidate at Hamming distance {e} is outside the ball of radius {e_max}"
        )));
    }
    let v = content_vocab_size(vocab)?;
    Ok(log_q0_value(m, e, v))
}

/// Draws one sample from `q0` around `y*` using the supplied RNG, scoring it
/// with `reward_fn`. Most callers want [`draw_samples`], which also derives
/// the per-(pair, epoch) RNG stream.
pub fn draw_sample_with(
    y_star: &Sentence,
    vocab: &Vocab,
    pair_id: usize,
    reward_fn: &dyn RewardFn,
    rng: &mut impl Rng,
) -> Result<AugmentedSample> {
    if y_star.is_empty() {
        return Err(Error::domain("cannot augment an empty target"));
    }
    let v = content_vocab_size(vocab)?;
    let m = y_star.len();
    let e_max = max_edits(m);
    let e = rng.gen_range(0..=e_max);

    let mut ids = y_star.ids().to_vec();
    let mut positions = rand::seq::index::sample(rng, m, e).into_vec();
    positions.sort_unstable();
    let content_base = (vocab.len() - vocab.content_len()) as u32;
    for &pos in &positions {
        let original = ids[pos];
        let r = rng.gen_range(0..v - 1) as u32;
        let offset = original - content_base;
        ids[pos] = content_base + if r >= offset { r + 1 } else { r };
    }

    let y_tilde = Sentence::new(ids);
    let reward = reward_fn.reward(&y_tilde, y_star)?.value();
    debug_assert_eq!(reward, -(e as f64), "Hamming reward must equal -e");
    Ok(AugmentedSample {
        pair_id,
        y_tilde,
        e,
        reward,
        log_q0: log_q0_value(m, e, v),
    })
}

/// Draws the K samples for one pair in one epoch. The RNG stream is keyed by
/// `(seed, pair_id, epoch)`, so the draws do not depend on batch layout or on
/// other pairs. Duplicates are kept; the weighting stage treats each row as
/// its own draw.
pub fn draw_samples(
    y_star: &Sentence,
    vocab: &Vocab,
    cfg: &AugmentConfig,
    pair_id: usize,
    epoch: usize,
) -> Result<Vec<AugmentedSample>> {
    cfg.validate()?;
    let mut rng = stream_rng(cfg.seed, StreamKind::Augment, pack_pair_epoch(pair_id, epoch));
    (0..cfg.samples_per_pair)
        .map(|_| draw_sample_with(y_star, vocab, pair_id, &hamming_reward_fn(), &mut rng))
        .collect()
}

fn hamming_reward_fn() -> impl RewardFn {
    crate::rewards::HammingReward
}

/// Materializes the full Hamming ball of radius `max_edits(m)` around `y*`
/// in a fixed order: ascending edit count, position combinations in
/// lexicographic order, replacement tokens in id order. `y*` itself is the
/// first element. Errors when the ball would exceed `cap`.
pub fn enumerate_ball(
    y_star: &Sentence,
    vocab: &Vocab,
    cap: usize,
) -> Result<Vec<(Sentence, usize)>> {
    enumerate_ball_with_radius(y_star, vocab, max_edits(y_star.len()), cap)
}

/// [`enumerate_ball`] with the edit radius chosen by the caller instead of
/// tied to the target length. Oracle checks use this to build enumerable
/// supports on targets too short for the default radius.
pub fn enumerate_ball_with_radius(
    y_star: &Sentence,
    vocab: &Vocab,
    radius: usize,
    cap: usize,
) -> Result<Vec<(Sentence, usize)>> {
    if y_star.is_empty() {
        return Err(Error::domain("cannot enumerate the ball of an empty target"));
    }
    let v = content_vocab_size(vocab)?;
    let m = y_star.len();
    if radius > m {
        return Err(Error::domain(format!(
            "edit radius {radius} exceeds target length {m}"
        )));
    }
    let e_max = radius;

    let mut size: u128 = 0;
    for e in 0..=e_max {
        size += binomial(m, e) * (v as u128 - 1).pow(e as u32);
    }
    if size > cap as u128 {
        return Err(Error::config(format!(
            "Hamming ball has {size} elements, above the cap of {cap}; choose a \
             smaller toy instance (shorter targets or a smaller vocabulary)"
        )));
    }

    let content_base = (vocab.len() - vocab.content_len()) as u32;
    let replacements_at = |pos: usize| -> Vec<u32> {
        (0..v as u32)
            .map(|r| content_base + r)
            .filter(|&id| id != y_star.ids()[pos])
            .collect()
    };

    let mut ball = Vec::with_capacity(size as usize);
    ball.push((y_star.clone(), 0));
    for e in 1..=e_max {
        let mut positions: Vec<usize> = (0..e).collect();
        loop {
            let options: Vec<Vec<u32>> = positions.iter().map(|&p| replacements_at(p)).collect();
            let mut choice = vec![0usize; e];
            loop {
                let mut ids = y_star.ids().to_vec();
                for (slot, &pos) in positions.iter().enumerate() {
                    ids[pos] = options[slot][choice[slot]];
                }
                ball.push((Sentence::new(ids), e));
                if !advance_odometer(&mut choice, &options) {
                    break;
                }
            }
            if !advance_combination(&mut positions, m) {
                break;
            }
        }
    }
    debug_assert_eq!(ball.len() as u128, size);
    Ok(ball)
}

/// Steps `choice` to the next mixed-radix value; false once it wraps.
fn advance_odometer(choice: &mut [usize], options: &[Vec<u32>]) -> bool {
    for slot in (0..choice.len()).rev() {
        choice[slot] += 1;
        if choice[slot] < options[slot].len() {
            return true;
        }
        choice[slot] = 0;
    }
    false
}

/// Steps `positions` to the next k-combination of `0..m` in lexicographic
/// order; false once the last combination has been visited.
fn advance_combination(positions: &mut [usize], m: usize) -> bool {
    let e = positions.len();
    for i in (0..e).rev() {
        if positions[i] < m - e + i {
            positions[i] += 1;
            for j in i + 1..e {
                positions[j] = positions[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Writes augmented samples as TSV rows: pair_id, e, reward, log_q0 (17
/// significant digits), space-joined target tokens.
pub fn save_augmented(
    samples: &[AugmentedSample],
    vocab: &Vocab,
    path: impl AsRef<Path>,
) -> Result<()> {
    let mut out = String::new();
    for s in samples {
        writeln!(
            out,
            "{}\t{}\t{}\t{:.16e}\t{}",
            s.pair_id,
            s.e,
            s.reward,
            s.log_q0,
            s.y_tilde.to_text(vocab)?
        )
        .expect("string write cannot fail");
    }
    fs::write(path, out)?;
    Ok(())
}

/// Reads a persisted augmented set back, validating each row against the
/// corpus it was drawn from: the pair must exist, and edit count, reward,
/// and proposal density must match the recorded target.
pub fn load_augmented(
    path: impl AsRef<Path>,
    vocab: &Vocab,
    corpus: &ParallelCorpus,
) -> Result<Vec<AugmentedSample>> {
    let text = fs::read_to_string(path.as_ref())
        .map_err(|e| Error::data(format!("cannot read augmented set {}: {e}", path.as_ref().display())))?;
    let mut samples = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let fail = |msg: String| Error::data(format!("augmented row {}: {msg}", lineno + 1));
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 5 {
            return Err(fail(format!("expected 5 tab-separated fields, got {}", fields.len())));
        }
        let pair_id: usize = fields[0].parse().map_err(|_| fail("bad pair id".into()))?;
        let e: usize = fields[1].parse().map_err(|_| fail("bad edit count".into()))?;
        let reward: f64 = fields[2].parse().map_err(|_| fail("bad reward".into()))?;
        let stored_log_q0: f64 = fields[3].parse().map_err(|_| fail("bad log_q0".into()))?;
        let y_tilde = Sentence::from_text(fields[4], vocab).map_err(|err| fail(err.to_string()))?;

        let (_, y_star) = corpus
            .pair(pair_id)
            .ok_or_else(|| fail(format!("pair id {pair_id} outside corpus")))?;
        let expected_e = hamming_reward(&y_tilde, y_star)
            .map_err(|err| fail(err.to_string()))?
            .value();
        if expected_e != -(e as f64) || reward != expected_e {
            return Err(fail(format!(
                "edit count/reward inconsistent with target (distance {}, row says e={e}, reward={reward})",
                -expected_e
            )));
        }
        let expected_log_q0 = log_q0(&y_tilde, y_star, vocab).map_err(|err| fail(err.to_string()))?;
        if (stored_log_q0 - expected_log_q0).abs() > 1e-9 {
            return Err(fail(format!(
                "log_q0 {stored_log_q0} does not match recomputed {expected_log_q0}"
            )));
        }
        samples.push(AugmentedSample {
            pair_id,
            y_tilde,
            e,
            reward,
            log_q0: stored_log_q0,
        });
    }
    Ok(samples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_synthetic, Split, SyntheticTaskSpec, TaskKind};
    use std::collections::HashSet;

    fn vocab(v: usize) -> Vocab {
        Vocab::new((0..v).map(|i| format!("w{i}"))).unwrap()
    }

    fn sentence(len: usize) -> Sentence {
        Sentence::new((0..len).map(|i| 3 + (i % 3) as u32).collect())
    }

    #[test]
    fn max_edits_examples() {
        assert_eq!(max_edits(7), 1);
        assert_eq!(max_edits(10), 2);
        assert_eq!(max_edits(4), 0);
        assert_eq!(max_edits(5), 1);
    }

    #[test]
    fn log_q0_hand_values() {
        let v6 = vocab(6);
        let y = sentence(5);
        // m=5 -> E=1; unchanged candidate: ln(1/2).
        let lq = log_q0(&y, &y, &v6).unwrap();
        assert!((lq - 0.5f64.ln()).abs() < 1e-12, "observed {lq}");

        // One edit, V=6: ln(1/2 * 1/5 * 1/5) = ln 0.02.
        let mut ids = y.ids().to_vec();
        ids[2] = if ids[2] == 3 { 4 } else { 3 };
        let lq = log_q0(&Sentence::new(ids), &y, &v6).unwrap();
        assert!((lq - 0.02f64.ln()).abs() < 1e-12, "observed {lq}");

        // m=10 -> E=2; unchanged candidate: ln(1/3).
        let y10 = sentence(10);
        let lq = log_q0(&y10, &y10, &v6).unwrap();
        assert!((lq - (1f64 / 3.0).ln()).abs() < 1e-12, "observed {lq}");
    }

    #[test]
    fn log_q0_rejects_candidates_outside_support() {
        let v = vocab(4);
        let y = sentence(5);
        let mut ids = y.ids().to_vec();
        ids[0] = 6;
        ids[1] = 6;
        // Two edits but E=1.
        assert!(log_q0(&Sentence::new(ids), &y, &v).is_err());
        assert!(log_q0(&sentence(4), &y, &v).is_err());
    }

    #[test]
    fn ball_size_and_membership() {
        // m=5, V=3, E=1: 1 + 5*2 = 11 sentences.
        let v = vocab(3);
        let y = Sentence::new(vec![3, 4, 5, 3, 4]);
        let ball = enumerate_ball(&y, &v, DEFAULT_BALL_CAP).unwrap();
        assert_eq!(ball.len(), 11);
        assert_eq!(ball[0].0, y);
        assert_eq!(ball[0].1, 0);
        let distinct: HashSet<&Sentence> = ball.iter().map(|(s, _)| s).collect();
        assert_eq!(distinct.len(), 11, "ball must be duplicate-free");
        for (s, e) in &ball {
            let d = hamming_reward(s, &y).unwrap().value();
            assert_eq!(-d, *e as f64);
        }
        // Below the edit threshold the ball is just the reference itself.
        let short = Sentence::new(vec![3, 4, 5]);
        let tiny = enumerate_ball(&short, &v, DEFAULT_BALL_CAP).unwrap();
        assert_eq!(tiny.len(), 1);
    }

    #[test]
    fn ball_cap_is_enforced() {
        let v = vocab(3);
        let y = Sentence::new(vec![3, 4, 5, 3, 4]);
        assert!(enumerate_ball(&y, &v, 10).is_err());
        assert!(enumerate_ball(&y, &v, 11).is_ok());
    }

    #[test]
    fn proposal_normalizes_over_every_small_ball() {
        // Sum of exp(log_q0) over the ball must be exactly 1 for all m <= 6,
        // V <= 6 (q0 is a distribution over the ball by construction).
        for v_size in 2..=6 {
            let v = vocab(v_size);
            for m in 1..=6 {
                let ids: Vec<u32> = (0..m).map(|i| 3 + (i % v_size) as u32).collect();
                let y = Sentence::new(ids);
                let ball = enumerate_ball(&y, &v, DEFAULT_BALL_CAP).unwrap();
                let total: f64 = ball
                    .iter()
                    .map(|(s, _)| log_q0(s, &y, &v).unwrap().exp())
                    .sum();
                assert!(
                    (total - 1.0).abs() < 1e-12,
                    "sum q0 = {total} for m={m}, V={v_size}"
                );
            }
        }
    }

    #[test]
    fn draws_stay_in_support_and_respect_streams() {
        let v = vocab(6);
        let y = sentence(10);
        let cfg = AugmentConfig { seed: 3, samples_per_pair: 16, ..AugmentConfig::default() };
        let a = draw_samples(&y, &v, &cfg, 4, 2).unwrap();
        let b = draw_samples(&y, &v, &cfg, 4, 2).unwrap();
        assert_eq!(a, b, "same (seed, pair, epoch) must reproduce draws");
        let c = draw_samples(&y, &v, &cfg, 4, 3).unwrap();
        assert_ne!(a, c, "fresh epoch must redraw");

        for s in &a {
            assert!(s.e <= max_edits(10));
            assert_eq!(s.reward, -(s.e as f64));
            assert_eq!(s.y_tilde.len(), y.len());
            let expected = log_q0(&s.y_tilde, &y, &v).unwrap();
            assert_eq!(s.log_q0, expected);
            s.y_tilde.validate(&v).unwrap();
        }
    }

    #[test]
    fn empirical_edit_counts_match_uniform_choice() {
        // m=5 -> E=1, so P(e=0) = 1/2. Check 100k draws within 3 standard
        // errors of the binomial proportion.
        let v = vocab(6);
        let y = sentence(5);
        let n = 100_000;
        let cfg = AugmentConfig { seed: 17, samples_per_pair: n, ..AugmentConfig::default() };
        let samples = draw_samples(&y, &v, &cfg, 0, 0).unwrap();
        let zero = samples.iter().filter(|s| s.e == 0).count();
        let freq = zero as f64 / n as f64;
        let se = (0.5 * 0.5 / n as f64).sqrt();
        assert!(
            (freq - 0.5).abs() <= 3.0 * se,
            "freq(e=0) = {freq}, want 0.5 +/- {}",
            3.0 * se
        );
    }

    #[test]
    fn tsv_round_trip() {
        let spec = SyntheticTaskSpec {
            kind: TaskKind::Reverse,
            content_vocab_size: 6,
            len_min: 5,
            len_max: 10,
            train_pairs: 12,
            dev_pairs: 0,
            test_pairs: 0,
            seed: 9,
        };
        let corpora = generate_synthetic(&spec).unwrap();
        let cfg = AugmentConfig { seed: 21, samples_per_pair: 4, ..AugmentConfig::default() };
        let mut samples = Vec::new();
        for (pair_id, (_, y_star)) in corpora.train.iter() {
            samples.extend(draw_samples(y_star, &corpora.vocab, &cfg, pair_id, 0).unwrap());
        }

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("aug.tsv");
        save_augmented(&samples, &corpora.vocab, &path).unwrap();
        let loaded = load_augmented(&path, &corpora.vocab, &corpora.train).unwrap();
        assert_eq!(samples, loaded);
        assert_eq!(corpora.train.split(), Split::Train);
    }

    #[test]
    fn load_rejects_inconsistent_rows() {
        let spec = SyntheticTaskSpec {
            kind: TaskKind::Copy,
            content_vocab_size: 4,
            len_min: 5,
            len_max: 5,
            train_pairs: 2,
            dev_pairs: 0,
            test_pairs: 0,
            seed: 1,
        };
        let corpora = generate_synthetic(&spec).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("aug.tsv");
        let tgt = corpora.train.pair(0).unwrap().1.to_text(&corpora.vocab).unwrap();
        // Edit count inconsistent with the unchanged target.
        std::fs::write(&path, format!("0\t1\t-1\t-6.9314718055994531e-1\t{tgt}\n")).unwrap();
        assert!(load_augmented(&path, &corpora.vocab, &corpora.train).is_err());
    }
}
