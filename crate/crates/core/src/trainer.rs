//! Training loop: per-epoch augmentation, frozen per-context weights, SGD
//! with global-norm clipping, and a dev-BLEU-driven step-size decay.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::augment::{draw_samples, AugmentConfig, AugmentedSample};
use crate::data::{batches, ParallelCorpus, Sentence, Vocab};
use crate::error::{Error, Result};
use crate::model::{
    accumulate_gradient, beam_decode, forward_cached, greedy_decode, GradientEstimate,
    ModelConfig, Parameters,
};
use crate::objectives::{
    surrogate_loss, weight_batch, ObjectiveConfig, ObjectiveKind, ScoredContext,
};
use crate::rewards::corpus_bleu;

/// File name of the best-epoch checkpoint inside the checkpoint directory.
pub const BEST_CHECKPOINT: &str = "best.ckpt";

/// How the per-pair sample sets evolve across epochs.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum AugmentMode {
    /// Redraw every pair's samples each epoch from the `(pair, epoch)`
    /// stream. Lower-variance gradients over the course of training.
    #[default]
    Fresh,
    /// Draw once from the epoch-0 streams and reuse the same set every
    /// epoch. Matches what a persisted augmented file contains, for exact
    /// reproducibility studies.
    Fixed,
}

impl AugmentMode {
    pub fn name(self) -> &'static str {
        match self {
            AugmentMode::Fresh => "fresh",
            AugmentMode::Fixed => "fixed",
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        match text {
            "fresh" => Ok(AugmentMode::Fresh),
            "fixed" => Ok(AugmentMode::Fixed),
            other => Err(Error::config(format!("unknown augment mode {other:?}"))),
        }
    }
}

/// Everything the training loop needs beyond the model shape.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub objective: ObjectiveConfig,
    pub augment: AugmentConfig,
    pub augment_mode: AugmentMode,
    pub lr0: f64,
    pub lr_min: f64,
    pub decay: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub clip_norm: f64,
    pub seed: u64,
    pub checkpoint_dir: Option<PathBuf>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            objective: ObjectiveConfig::default(),
            augment: AugmentConfig::default(),
            augment_mode: AugmentMode::default(),
            lr0: 1.0,
            lr_min: 0.05,
            decay: 0.5,
            batch_size: 32,
            max_epochs: 30,
            clip_norm: 5.0,
            seed: 0,
            checkpoint_dir: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.objective.validate()?;
        self.augment.validate()?;
        if !(self.lr0.is_finite() && self.lr_min.is_finite()) {
            return Err(Error::config("learning rates must be finite"));
        }
        if !(0.0 < self.lr_min && self.lr_min <= self.lr0) {
            return Err(Error::config(format!(
                "need 0 < lr_min <= lr0, got lr_min {} and lr0 {}",
                self.lr_min, self.lr0
            )));
        }
        if !(self.decay.is_finite() && 0.0 < self.decay && self.decay < 1.0) {
            return Err(Error::config(format!(
                "train.decay must lie strictly between 0 and 1, got {}",
                self.decay
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::config("train.batch_size must be positive"));
        }
        if self.max_epochs == 0 {
            return Err(Error::config("train.max_epochs must be positive"));
        }
        if !(self.clip_norm.is_finite() && self.clip_norm > 0.0) {
            return Err(Error::config(format!(
                "train.clip_norm must be positive, got {}",
                self.clip_norm
            )));
        }
        Ok(())
    }
}

/// One epoch's line in the training log.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub mean_loss: f64,
    pub dev_bleu: f64,
    pub lr: f64,
    pub wall_secs: f64,
}

/// Full-run summary: per-epoch records plus the best-dev selection.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_dev_bleu: f64,
}

impl TrainReport {
    /// TSV rendering: two `#` header lines with the best-dev selection,
    /// then one row per epoch.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        writeln!(out, "# best_epoch\t{}", self.best_epoch).expect("string write cannot fail");
        writeln!(out, "# best_dev_bleu\t{}", self.best_dev_bleu).expect("string write cannot fail");
        writeln!(out, "epoch\tmean_loss\tdev_bleu\tlr\twall_secs").expect("string write cannot fail");
        for r in &self.epochs {
            writeln!(
                out,
                "{}\t{}\t{}\t{}\t{:.3}",
                r.epoch, r.mean_loss, r.dev_bleu, r.lr, r.wall_secs
            )
            .expect("string write cannot fail");
        }
        out
    }

    pub fn save_tsv(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_tsv())?;
        Ok(())
    }

    /// Bit-exact equality over everything the computation determines. Wall
    /// clock time is environment, not computation, so it is excluded.
    pub fn deterministic_eq(&self, other: &TrainReport) -> bool {
        self.best_epoch == other.best_epoch
            && self.best_dev_bleu.to_bits() == other.best_dev_bleu.to_bits()
            && self.epochs.len() == other.epochs.len()
            && self.epochs.iter().zip(&other.epochs).all(|(a, b)| {
                a.epoch == b.epoch
                    && a.mean_loss.to_bits() == b.mean_loss.to_bits()
                    && a.dev_bleu.to_bits() == b.dev_bleu.to_bits()
                    && a.lr.to_bits() == b.lr.to_bits()
            })
    }
}

/// Decode strategy for evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SearchKind {
    Greedy,
    Beam(usize),
}

/// Decodes every source with the chosen search and scores corpus BLEU
/// against the references.
pub fn evaluate(
    params: &Parameters,
    model_cfg: &ModelConfig,
    corpus: &ParallelCorpus,
    search: SearchKind,
) -> Result<f64> {
    if corpus.is_empty() {
        return Err(Error::data(format!(
            "cannot evaluate on an empty {} split",
            corpus.split().name()
        )));
    }
    let mut hyps = Vec::with_capacity(corpus.len());
    let mut refs = Vec::with_capacity(corpus.len());
    for (_, (x, y)) in corpus.iter() {
        let hyp = match search {
            SearchKind::Greedy => greedy_decode(params, model_cfg, x)?,
            SearchKind::Beam(width) => beam_decode(params, model_cfg, x, width)?,
        };
        hyps.push(hyp);
        refs.push(y.clone());
    }
    corpus_bleu(&hyps, &refs)
}

/// The dev-decay rule: any epoch whose dev BLEU does not strictly improve
/// the running best multiplies the step size by `decay`; training stops
/// once the rate falls below `lr_min`.
struct DecaySchedule {
    lr: f64,
    best: f64,
    decay: f64,
    lr_min: f64,
}

impl DecaySchedule {
    fn new(cfg: &TrainConfig) -> Self {
        DecaySchedule {
            lr: cfg.lr0,
            best: 0.0,
            decay: cfg.decay,
            lr_min: cfg.lr_min,
        }
    }

    fn lr(&self) -> f64 {
        self.lr
    }

    /// Records one epoch's dev BLEU; returns true when training should stop.
    fn observe(&mut self, dev_bleu: f64) -> bool {
        if dev_bleu > self.best {
            self.best = dev_bleu;
        } else {
            self.lr *= self.decay;
        }
        self.lr < self.lr_min
    }
}

/// The target itself as a weight-1 sample: the maximum-likelihood case,
/// and the collapse point of the estimator at K=1 with zero edits.
fn bare_sample(pair_id: usize, y_star: &Sentence) -> AugmentedSample {
    AugmentedSample {
        pair_id,
        y_tilde: y_star.clone(),
        e: 0,
        reward: 0.0,
        log_q0: 0.0,
    }
}

/// Draws every pair's epoch-0 sample set up front, as [`AugmentMode::Fixed`]
/// reuses it across epochs.
fn fixed_sample_sets(
    corpus: &ParallelCorpus,
    vocab: &Vocab,
    cfg: &AugmentConfig,
) -> Result<Vec<Vec<AugmentedSample>>> {
    corpus
        .iter()
        .map(|(pair_id, (_, y_star))| draw_samples(y_star, vocab, cfg, pair_id, 0))
        .collect()
}

/// Trains from a fresh initialization and returns the parameters of the
/// best-dev epoch together with the per-epoch report.
///
/// Each epoch shuffles the training pairs, builds every pair's sample set
/// (the maximum-likelihood objective scores the bare pair; the others draw
/// from the proposal according to the augment mode), computes frozen
/// normalized weights from the current parameters, and applies one clipped
/// SGD step per batch. After the epoch, greedy dev BLEU drives the decay
/// schedule and best-parameter selection.
pub fn train(
    train_corpus: &ParallelCorpus,
    dev_corpus: &ParallelCorpus,
    vocab: &Vocab,
    model_cfg: &ModelConfig,
    cfg: &TrainConfig,
) -> Result<(Parameters, TrainReport)> {
    cfg.validate()?;
    if cfg.objective.kind != ObjectiveKind::Ml && cfg.augment_mode == AugmentMode::Fixed {
        let fixed = fixed_sample_sets(train_corpus, vocab, &cfg.augment)?;
        run_loop(train_corpus, dev_corpus, vocab, model_cfg, cfg, Some(&fixed))
    } else {
        run_loop(train_corpus, dev_corpus, vocab, model_cfg, cfg, None)
    }
}

/// [`train`], but with an externally supplied per-pair sample set (for
/// example a persisted augmented file) used identically in every epoch.
/// The augment mode in the config is ignored.
pub fn train_with_fixed_samples(
    train_corpus: &ParallelCorpus,
    dev_corpus: &ParallelCorpus,
    vocab: &Vocab,
    model_cfg: &ModelConfig,
    cfg: &TrainConfig,
    samples: &[Vec<AugmentedSample>],
) -> Result<(Parameters, TrainReport)> {
    cfg.validate()?;
    if samples.len() != train_corpus.len() {
        return Err(Error::data(format!(
            "fixed sample sets cover {} pairs but the corpus has {}",
            samples.len(),
            train_corpus.len()
        )));
    }
    if let Some(pair_id) = samples.iter().position(|s| s.is_empty()) {
        return Err(Error::data(format!(
            "fixed sample set for pair {pair_id} is empty"
        )));
    }
    run_loop(train_corpus, dev_corpus, vocab, model_cfg, cfg, Some(samples))
}

fn run_loop(
    train_corpus: &ParallelCorpus,
    dev_corpus: &ParallelCorpus,
    vocab: &Vocab,
    model_cfg: &ModelConfig,
    cfg: &TrainConfig,
    fixed: Option<&[Vec<AugmentedSample>]>,
) -> Result<(Parameters, TrainReport)> {
    model_cfg.validate()?;
    if train_corpus.is_empty() {
        return Err(Error::data("training split is empty"));
    }
    if dev_corpus.is_empty() {
        return Err(Error::data("dev split is empty"));
    }

    let mut params = Parameters::init(model_cfg)?;
    let mut schedule = DecaySchedule::new(cfg);
    let mut best_params = params.clone();
    let mut best_bleu = -1.0;
    let mut best_epoch = 0;
    let mut records = Vec::new();

    for epoch in 1..=cfg.max_epochs {
        let started = Instant::now();
        let lr = schedule.lr();

        let mut loss_sum = 0.0;
        let mut contexts_seen = 0usize;
        for (batch_idx, batch) in batches(train_corpus, cfg.batch_size, cfg.seed, epoch)?
            .iter()
            .enumerate()
        {
            let (loss, mut grad) =
                batch_step(&params, batch.pair_ids.as_slice(), train_corpus, vocab, cfg, epoch, fixed)
                    .map_err(|err| amend(err, epoch, batch_idx))?;
            if !loss.is_finite() {
                return Err(Error::non_finite(format!(
                    "surrogate loss {loss} at epoch {epoch}, batch {}",
                    batch_idx + 1
                )));
            }
            grad.check_finite().map_err(|err| amend(err, epoch, batch_idx))?;
            grad.clip_global_norm(cfg.clip_norm);
            params.sgd_step(&grad, lr);

            loss_sum += loss * batch.len() as f64;
            contexts_seen += batch.len();
        }
        let mean_loss = loss_sum / contexts_seen as f64;

        let dev_bleu = evaluate(&params, model_cfg, dev_corpus, SearchKind::Greedy)?;
        records.push(EpochRecord {
            epoch,
            mean_loss,
            dev_bleu,
            lr,
            wall_secs: started.elapsed().as_secs_f64(),
        });

        if dev_bleu > best_bleu {
            best_bleu = dev_bleu;
            best_epoch = epoch;
            best_params = params.clone();
            if let Some(dir) = &cfg.checkpoint_dir {
                fs::create_dir_all(dir)?;
                best_params.save(dir.join(BEST_CHECKPOINT))?;
            }
        }

        if schedule.observe(dev_bleu) {
            break;
        }
    }

    let report = TrainReport {
        epochs: records,
        best_epoch,
        best_dev_bleu: best_bleu,
    };
    Ok((best_params, report))
}

fn amend(err: Error, epoch: usize, batch_idx: usize) -> Error {
    match err {
        Error::NonFinite(msg) => {
            Error::non_finite(format!("{msg} (epoch {epoch}, batch {})", batch_idx + 1))
        }
        other => other,
    }
}

/// One batch: build each pair's sample set, score every sample under the
/// current parameters, freeze the normalized weights, and accumulate the
/// exact gradient of the weighted negative log-likelihood. Each scored
/// sequence's cached forward pass serves both the weight computation and
/// the gradient.
fn batch_step(
    params: &Parameters,
    pair_ids: &[usize],
    corpus: &ParallelCorpus,
    vocab: &Vocab,
    cfg: &TrainConfig,
    epoch: usize,
    fixed: Option<&[Vec<AugmentedSample>]>,
) -> Result<(f64, GradientEstimate)> {
    let mut contexts = Vec::with_capacity(pair_ids.len());
    let mut scored_rows = Vec::with_capacity(pair_ids.len());
    for &pair_id in pair_ids {
        let (x, y_star) = corpus
            .pair(pair_id)
            .ok_or_else(|| Error::data(format!("pair id {pair_id} outside corpus")))?;
        let samples = match cfg.objective.kind {
            ObjectiveKind::Ml => vec![bare_sample(pair_id, y_star)],
            _ => match fixed {
                Some(sets) => sets[pair_id].clone(),
                None => draw_samples(y_star, vocab, &cfg.augment, pair_id, epoch)?,
            },
        };

        let mut scored_row = Vec::with_capacity(samples.len());
        let mut with_log_p = Vec::with_capacity(samples.len());
        for sample in samples {
            let scored = forward_cached(params, x, &sample.y_tilde)?;
            let log_p = scored.total();
            scored_row.push(scored);
            with_log_p.push((sample, Some(log_p)));
        }
        contexts.push(ScoredContext {
            pair_id,
            source: x.clone(),
            samples: with_log_p,
        });
        scored_rows.push(scored_row);
    }

    let batch = weight_batch(contexts, &cfg.objective)?;
    let scale = 1.0 / batch.contexts.len() as f64;
    let mut grad = GradientEstimate::zeros_like(params);
    let mut log_probs = Vec::with_capacity(batch.contexts.len());
    for (ctx, row) in batch.contexts.iter().zip(&scored_rows) {
        for (weighted, scored) in ctx.samples.iter().zip(row) {
            accumulate_gradient(params, scored, weighted.weight * scale, &mut grad);
        }
        log_probs.push(row.iter().map(|s| s.total()).collect());
    }
    let loss = surrogate_loss(&batch, &log_probs)?;
    Ok((loss, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_synthetic, SyntheticTaskSpec, TaskKind};
    use tempfile::tempdir;

    fn toy_task(train_pairs: usize, len_max: usize) -> crate::data::SyntheticCorpora {
        generate_synthetic(&SyntheticTaskSpec {
            kind: TaskKind::Copy,
            content_vocab_size: 5,
            len_min: 2,
            len_max,
            train_pairs,
            dev_pairs: 4,
            test_pairs: 4,
            seed: 11,
        })
        .unwrap()
    }

    fn tiny_model(vocab_len: usize) -> ModelConfig {
        let mut c = ModelConfig::new(vocab_len, vocab_len);
        c.embed_dim = 4;
        c.hidden_dim = 6;
        c.max_decode_len = 8;
        c.seed = 3;
        c
    }

    fn short_run_config(kind: ObjectiveKind, alpha: f64, k: usize, max_epochs: usize) -> TrainConfig {
        TrainConfig {
            objective: ObjectiveConfig {
                kind,
                alpha,
                tau: 3.0,
            },
            augment: AugmentConfig {
                samples_per_pair: k,
                seed: 17,
                ..AugmentConfig::default()
            },
            batch_size: 4,
            max_epochs,
            seed: 29,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn stagnation_walks_the_decay_ladder() {
        let cfg = TrainConfig::default();
        let mut schedule = DecaySchedule::new(&cfg);
        let mut rates = Vec::new();
        loop {
            rates.push(schedule.lr());
            if schedule.observe(0.0) {
                break;
            }
        }
        assert_eq!(rates, vec![1.0, 0.5, 0.25, 0.125, 0.0625]);
        assert_eq!(schedule.lr(), 0.03125);
    }

    #[test]
    fn improvement_holds_the_rate_and_ties_decay_it() {
        let cfg = TrainConfig::default();
        let mut schedule = DecaySchedule::new(&cfg);
        for bleu in [10.0, 20.0, 30.0] {
            assert!(!schedule.observe(bleu));
            assert_eq!(schedule.lr(), 1.0);
        }
        assert!(!schedule.observe(30.0));
        assert_eq!(schedule.lr(), 0.5);
        assert!(!schedule.observe(31.0));
        assert_eq!(schedule.lr(), 0.5);
    }

    #[test]
    fn config_validation_catches_bad_ranges() {
        let mut cfg = TrainConfig::default();
        cfg.lr_min = 2.0;
        assert!(cfg.validate().is_err());
        cfg = TrainConfig::default();
        cfg.decay = 1.0;
        assert!(cfg.validate().is_err());
        cfg = TrainConfig::default();
        cfg.decay = 0.0;
        assert!(cfg.validate().is_err());
        cfg = TrainConfig::default();
        cfg.batch_size = 0;
        assert!(cfg.validate().is_err());
        cfg = TrainConfig::default();
        cfg.clip_norm = 0.0;
        assert!(cfg.validate().is_err());
        assert!(TrainConfig::default().validate().is_ok());
    }

    fn params_bits(p: &Parameters) -> Vec<u64> {
        p.tensors()
            .into_iter()
            .flat_map(|(_, t)| t.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>())
            .collect()
    }

    #[test]
    fn ml_equals_estimator_collapsed_to_the_target() {
        // Targets of length <= 4 admit zero edits, so K=1 draws exactly the
        // target with weight 1 and the two objectives walk the same path.
        let data = toy_task(6, 4);
        let model_cfg = tiny_model(data.vocab.len());
        let ml = train(
            &data.train,
            &data.dev,
            &data.vocab,
            &model_cfg,
            &short_run_config(ObjectiveKind::Ml, 0.0, 1, 2),
        )
        .unwrap();
        let collapsed = train(
            &data.train,
            &data.dev,
            &data.vocab,
            &model_cfg,
            &short_run_config(ObjectiveKind::AlphaDimt, 0.5, 1, 2),
        )
        .unwrap();
        assert_eq!(params_bits(&ml.0), params_bits(&collapsed.0));
        assert!(ml.1.deterministic_eq(&collapsed.1));
    }

    #[test]
    fn identical_runs_are_bit_identical() {
        let data = toy_task(6, 5);
        let model_cfg = tiny_model(data.vocab.len());
        let cfg = short_run_config(ObjectiveKind::AlphaDimt, 0.5, 2, 3);
        let a = train(&data.train, &data.dev, &data.vocab, &model_cfg, &cfg).unwrap();
        let b = train(&data.train, &data.dev, &data.vocab, &model_cfg, &cfg).unwrap();
        assert!(a.1.deterministic_eq(&b.1));
        assert_eq!(params_bits(&a.0), params_bits(&b.0));
    }

    #[test]
    fn fixed_mode_reuses_the_epoch_zero_draws() {
        let data = toy_task(6, 6);
        let model_cfg = tiny_model(data.vocab.len());
        let mut cfg = short_run_config(ObjectiveKind::AlphaDimt, 0.5, 2, 2);
        cfg.augment_mode = AugmentMode::Fixed;
        let via_mode = train(&data.train, &data.dev, &data.vocab, &model_cfg, &cfg).unwrap();

        let fixed = fixed_sample_sets(&data.train, &data.vocab, &cfg.augment).unwrap();
        let via_samples = train_with_fixed_samples(
            &data.train,
            &data.dev,
            &data.vocab,
            &model_cfg,
            &cfg,
            &fixed,
        )
        .unwrap();
        assert!(via_mode.1.deterministic_eq(&via_samples.1));
        assert_eq!(params_bits(&via_mode.0), params_bits(&via_samples.0));
    }

    #[test]
    fn fixed_samples_must_cover_the_corpus() {
        let data = toy_task(6, 5);
        let model_cfg = tiny_model(data.vocab.len());
        let cfg = short_run_config(ObjectiveKind::AlphaDimt, 0.5, 2, 2);
        let short = fixed_sample_sets(&data.train, &data.vocab, &cfg.augment).unwrap()[..5].to_vec();
        let err = train_with_fixed_samples(
            &data.train,
            &data.dev,
            &data.vocab,
            &model_cfg,
            &cfg,
            &short,
        )
        .unwrap_err();
        assert!(err.to_string().contains("5 pairs"), "{err}");
    }

    #[test]
    fn best_epoch_tracks_the_maximal_dev_bleu() {
        let data = toy_task(8, 4);
        let model_cfg = tiny_model(data.vocab.len());
        let mut cfg = short_run_config(ObjectiveKind::Ml, 0.0, 1, 10);
        cfg.lr0 = 0.5;
        cfg.lr_min = 0.05;
        let (_, report) = train(&data.train, &data.dev, &data.vocab, &model_cfg, &cfg).unwrap();
        let max = report
            .epochs
            .iter()
            .map(|r| r.dev_bleu)
            .fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(report.best_dev_bleu, max);
        let best = report
            .epochs
            .iter()
            .find(|r| r.epoch == report.best_epoch)
            .unwrap();
        assert_eq!(best.dev_bleu, report.best_dev_bleu);
        let lrs: Vec<f64> = report.epochs.iter().map(|r| r.lr).collect();
        assert!(lrs.windows(2).all(|w| w[1] <= w[0]), "lr increased: {lrs:?}");
    }

    #[test]
    fn checkpoint_holds_the_returned_parameters() {
        let dir = tempdir().unwrap();
        let data = toy_task(6, 4);
        let model_cfg = tiny_model(data.vocab.len());
        let mut cfg = short_run_config(ObjectiveKind::Ml, 0.0, 1, 3);
        cfg.checkpoint_dir = Some(dir.path().to_path_buf());
        let (best, _) = train(&data.train, &data.dev, &data.vocab, &model_cfg, &cfg).unwrap();
        let loaded = Parameters::load(&model_cfg, dir.path().join(BEST_CHECKPOINT)).unwrap();
        assert_eq!(params_bits(&best), params_bits(&loaded));
    }

    #[test]
    fn runaway_step_size_aborts_with_location() {
        let data = toy_task(6, 4);
        let model_cfg = tiny_model(data.vocab.len());
        let mut cfg = short_run_config(ObjectiveKind::Ml, 0.0, 1, 4);
        cfg.lr0 = 1e300;
        cfg.lr_min = 1.0;
        let err = train(&data.train, &data.dev, &data.vocab, &model_cfg, &cfg).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("epoch"), "{msg}");
        assert!(matches!(err, Error::NonFinite(_)), "{msg}");
    }

    #[test]
    fn beam_one_evaluation_equals_greedy() {
        let data = toy_task(6, 5);
        let model_cfg = tiny_model(data.vocab.len());
        let params = Parameters::init(&model_cfg).unwrap();
        let greedy = evaluate(&params, &model_cfg, &data.test, SearchKind::Greedy).unwrap();
        let beam = evaluate(&params, &model_cfg, &data.test, SearchKind::Beam(1)).unwrap();
        assert_eq!(greedy.to_bits(), beam.to_bits());
    }

    #[test]
    fn evaluation_rejects_empty_corpora() {
        let data = toy_task(4, 4);
        let model_cfg = tiny_model(data.vocab.len());
        let params = Parameters::init(&model_cfg).unwrap();
        let empty = ParallelCorpus::new(crate::data::Split::Dev, Vec::new());
        assert!(evaluate(&params, &model_cfg, &empty, SearchKind::Greedy).is_err());
    }

    #[test]
    fn report_tsv_round_trips_the_fields() {
        let report = TrainReport {
            epochs: vec![EpochRecord {
                epoch: 1,
                mean_loss: 2.5,
                dev_bleu: 41.25,
                lr: 1.0,
                wall_secs: 0.125,
            }],
            best_epoch: 1,
            best_dev_bleu: 41.25,
        };
        let tsv = report.to_tsv();
        assert!(tsv.contains("# best_epoch\t1"));
        assert!(tsv.contains("1\t2.5\t41.25\t1\t0.125"));
    }
}
