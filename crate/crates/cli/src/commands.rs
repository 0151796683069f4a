//! One function per subcommand. Each validates the slice of the config it
//! uses, reads and writes only through files, and leaves a resolved config
//! next to whatever it produced.

use std::fs;
use std::path::PathBuf;

use adimt_core::augment::{draw_samples, load_augmented, save_augmented, AugmentedSample};
use adimt_core::data::{
    generate_synthetic, load_corpus, save_corpus, ParallelCorpus, Split, Vocab,
};
use adimt_core::error::{Error, Result};
use adimt_core::model::{forward_cached, ModelConfig, Parameters};
use adimt_core::objectives::{weight_batch, ObjectiveKind, ScoredContext};
use adimt_core::trainer::{
    evaluate, train, train_with_fixed_samples, AugmentMode, SearchKind, TrainReport,
    BEST_CHECKPOINT,
};
use adimt_core::verify::{run_all_suites, run_grad_suite, run_math_suite, run_oracle_suite};

use crate::config::RunConfig;

fn load_vocab(cfg: &RunConfig) -> Result<Vocab> {
    Vocab::load(cfg.data_dir.join("vocab.txt"))
}

fn load_split(cfg: &RunConfig, vocab: &Vocab, split: Split) -> Result<ParallelCorpus> {
    let name = split.name();
    load_corpus(
        cfg.data_dir.join(format!("{name}.src")),
        cfg.data_dir.join(format!("{name}.tgt")),
        vocab,
        split,
    )
}

/// Generates the synthetic task and writes vocab.txt plus
/// {train,dev,test}.{src,tgt} under the data directory.
pub fn gen_data(cfg: &RunConfig) -> Result<()> {
    let corpora = generate_synthetic(&cfg.task_spec())?;
    fs::create_dir_all(&cfg.data_dir)?;
    corpora.vocab.save(cfg.data_dir.join("vocab.txt"))?;
    for (split, corpus) in [
        (Split::Train, &corpora.train),
        (Split::Dev, &corpora.dev),
        (Split::Test, &corpora.test),
    ] {
        let name = split.name();
        save_corpus(
            corpus,
            &corpora.vocab,
            cfg.data_dir.join(format!("{name}.src")),
            cfg.data_dir.join(format!("{name}.tgt")),
        )?;
    }
    cfg.write_resolved(cfg.data_dir.join("gen-data.resolved.cfg"))?;
    println!(
        "wrote {} train / {} dev / {} test pairs under {}",
        corpora.train.len(),
        corpora.dev.len(),
        corpora.test.len(),
        cfg.data_dir.display()
    );
    Ok(())
}

/// Where the persisted augmented set lives: the configured path, or
/// augmented.tsv under the output directory.
fn augmented_out(cfg: &RunConfig) -> PathBuf {
    cfg.augmented_path
        .clone()
        .unwrap_or_else(|| cfg.out_dir.join("augmented.tsv"))
}

/// Draws the per-pair sample sets for the training corpus and persists
/// them as TSV.
pub fn augment(cfg: &RunConfig) -> Result<()> {
    let vocab = load_vocab(cfg)?;
    let corpus = load_split(cfg, &vocab, Split::Train)?;
    let acfg = cfg.augment_config();
    let mut samples = Vec::with_capacity(corpus.len() * acfg.samples_per_pair);
    for (pair_id, (_, y_star)) in corpus.iter() {
        samples.extend(draw_samples(y_star, &vocab, &acfg, pair_id, 0)?);
    }
    let path = augmented_out(cfg);
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    save_augmented(&samples, &vocab, &path)?;
    let resolved = path.with_file_name("augment.resolved.cfg");
    cfg.write_resolved(resolved)?;
    println!(
        "wrote {} samples for {} pairs to {}",
        samples.len(),
        corpus.len(),
        path.display()
    );
    Ok(())
}

fn group_by_pair(
    samples: Vec<AugmentedSample>,
    pairs: usize,
) -> Result<Vec<Vec<AugmentedSample>>> {
    let mut grouped: Vec<Vec<AugmentedSample>> = vec![Vec::new(); pairs];
    for sample in samples {
        let slot = grouped.get_mut(sample.pair_id).ok_or_else(|| {
            Error::data(format!(
                "augmented sample for pair {} but the corpus has {pairs} pairs",
                sample.pair_id
            ))
        })?;
        slot.push(sample);
    }
    Ok(grouped)
}

fn check_augmented_mode(cfg: &RunConfig) -> Result<()> {
    if cfg.augmented_path.is_some() && cfg.augment_mode != AugmentMode::Fixed {
        return Err(Error::config(
            "augmented_path is set but augment_mode is fresh; \
             a persisted sample set requires augment_mode = fixed"
                .to_string(),
        ));
    }
    Ok(())
}

/// Runs training under `cfg`, loading a persisted augmented set when one is
/// configured. The maximum-likelihood objective never consumes samples, so
/// it ignores the persisted set.
fn run_training(
    cfg: &RunConfig,
    vocab: &Vocab,
    train_corpus: &ParallelCorpus,
    dev_corpus: &ParallelCorpus,
    model_cfg: &ModelConfig,
) -> Result<(Parameters, TrainReport)> {
    let tcfg = cfg.train_config();
    match &cfg.augmented_path {
        Some(path) if cfg.objective != ObjectiveKind::Ml => {
            check_augmented_mode(cfg)?;
            let samples = load_augmented(path, vocab, train_corpus)?;
            let grouped = group_by_pair(samples, train_corpus.len())?;
            train_with_fixed_samples(train_corpus, dev_corpus, vocab, model_cfg, &tcfg, &grouped)
        }
        _ => train(train_corpus, dev_corpus, vocab, model_cfg, &tcfg),
    }
}

/// Trains one model and writes the best checkpoint, the per-epoch report,
/// and the resolved config under the output directory.
pub fn train_cmd(cfg: &RunConfig) -> Result<()> {
    let vocab = load_vocab(cfg)?;
    let train_corpus = load_split(cfg, &vocab, Split::Train)?;
    let dev_corpus = load_split(cfg, &vocab, Split::Dev)?;
    let model_cfg = cfg.model_config(vocab.len(), vocab.len());
    fs::create_dir_all(&cfg.out_dir)?;
    let (_, report) = run_training(cfg, &vocab, &train_corpus, &dev_corpus, &model_cfg)?;
    report.save_tsv(cfg.out_dir.join("train_report.tsv"))?;
    cfg.write_resolved(cfg.out_dir.join("train.resolved.cfg"))?;
    println!(
        "best epoch {} dev BLEU {:.2}; checkpoint {}",
        report.best_epoch,
        report.best_dev_bleu,
        cfg.out_dir.join(BEST_CHECKPOINT).display()
    );
    Ok(())
}

fn required_checkpoint(cfg: &RunConfig) -> Result<&PathBuf> {
    cfg.checkpoint.as_ref().ok_or_else(|| {
        Error::config("no checkpoint given (key 'checkpoint' or --checkpoint)".to_string())
    })
}

/// Decodes the configured split with the configured search and prints
/// corpus BLEU to two decimals.
pub fn eval_cmd(cfg: &RunConfig) -> Result<()> {
    let vocab = load_vocab(cfg)?;
    let corpus = load_split(cfg, &vocab, cfg.eval_split)?;
    let model_cfg = cfg.model_config(vocab.len(), vocab.len());
    let params = Parameters::load(&model_cfg, required_checkpoint(cfg)?)?;
    let bleu = evaluate(&params, &model_cfg, &corpus, cfg.search_kind())?;
    println!("{bleu:.2}");
    Ok(())
}

/// Runs the named self-check suite, printing one PASS/FAIL line per check.
/// Returns whether every check passed.
pub fn verify_cmd(suite: &str) -> Result<bool> {
    let checks = match suite {
        "math" => run_math_suite(),
        "grad" => run_grad_suite(),
        "oracle" => run_oracle_suite(),
        "all" => run_all_suites(),
        other => {
            return Err(Error::config(format!(
                "unknown suite {other:?} (expected math, grad, oracle, or all)"
            )))
        }
    };
    let mut failures = 0usize;
    for check in &checks {
        if check.passed {
            println!("PASS {}", check.name);
        } else {
            failures += 1;
            println!("FAIL {}: {}", check.name, check.detail);
        }
    }
    println!("{} checks, {} failed", checks.len(), failures);
    Ok(failures == 0)
}

/// Dumps the weighted batch for the chosen training pairs as TSV: one row
/// per sample with its edit count, reward, model log-probability, raw log
/// weight, and normalized weight.
pub fn inspect_weights(cfg: &RunConfig, pair_ids: &[usize]) -> Result<()> {
    if pair_ids.is_empty() {
        return Err(Error::config("no pair ids given (--pairs)".to_string()));
    }
    let vocab = load_vocab(cfg)?;
    let corpus = load_split(cfg, &vocab, Split::Train)?;
    let model_cfg = cfg.model_config(vocab.len(), vocab.len());
    let params = Parameters::load(&model_cfg, required_checkpoint(cfg)?)?;
    let ocfg = cfg.objective_config();

    let persisted = match &cfg.augmented_path {
        Some(path) if ocfg.kind != ObjectiveKind::Ml => {
            Some(group_by_pair(load_augmented(path, &vocab, &corpus)?, corpus.len())?)
        }
        _ => None,
    };

    let mut contexts = Vec::with_capacity(pair_ids.len());
    for &pair_id in pair_ids {
        let (x, y_star) = corpus.pair(pair_id).ok_or_else(|| {
            Error::data(format!(
                "pair id {pair_id} outside the train corpus ({} pairs)",
                corpus.len()
            ))
        })?;
        let samples = if ocfg.kind == ObjectiveKind::Ml {
            vec![AugmentedSample {
                pair_id,
                y_tilde: y_star.clone(),
                e: 0,
                reward: 0.0,
                log_q0: 0.0,
            }]
        } else {
            match &persisted {
                Some(grouped) => grouped[pair_id].clone(),
                None => draw_samples(y_star, &vocab, &cfg.augment_config(), pair_id, 0)?,
            }
        };
        let mut scored = Vec::with_capacity(samples.len());
        for sample in samples {
            let log_p = forward_cached(&params, x, &sample.y_tilde)?.total();
            scored.push((sample, Some(log_p)));
        }
        contexts.push(ScoredContext {
            pair_id,
            source: x.clone(),
            samples: scored,
        });
    }

    let batch = weight_batch(contexts, &ocfg)?;
    println!("pair_id\te\treward\tlog_p\tu\tw");
    for ctx in &batch.contexts {
        for s in &ctx.samples {
            println!(
                "{}\t{}\t{}\t{:.6e}\t{:.6e}\t{:.6e}",
                ctx.pair_id,
                s.sample.e,
                s.sample.reward,
                s.log_p.unwrap_or(f64::NAN),
                s.raw_log_weight,
                s.weight
            );
        }
    }
    Ok(())
}

/// The objective grid: maximum likelihood, the alpha = 0 member, and three
/// interior alphas.
const SWEEP_GRID: [(&str, ObjectiveKind, f64); 5] = [
    ("ml", ObjectiveKind::Ml, 0.0),
    ("raml", ObjectiveKind::Raml, 0.0),
    ("alpha_0.3", ObjectiveKind::AlphaDimt, 0.3),
    ("alpha_0.5", ObjectiveKind::AlphaDimt, 0.5),
    ("alpha_0.7", ObjectiveKind::AlphaDimt, 0.7),
];

/// Trains and evaluates every grid point sequentially with otherwise
/// identical settings and writes one summary row per objective.
pub fn sweep(cfg: &RunConfig) -> Result<()> {
    check_augmented_mode(cfg)?;
    let vocab = load_vocab(cfg)?;
    let train_corpus = load_split(cfg, &vocab, Split::Train)?;
    let dev_corpus = load_split(cfg, &vocab, Split::Dev)?;
    let test_corpus = load_split(cfg, &vocab, Split::Test)?;
    let model_cfg = cfg.model_config(vocab.len(), vocab.len());

    let mut table = format!(
        "objective\talpha\tbest_dev_bleu\ttest_greedy\ttest_beam{}\n",
        cfg.beam_width
    );
    for (label, kind, alpha) in SWEEP_GRID {
        let mut leg = cfg.clone();
        leg.objective = kind;
        leg.alpha = alpha;
        leg.out_dir = cfg.out_dir.join("sweep").join(label);
        fs::create_dir_all(&leg.out_dir)?;

        let (params, report) =
            run_training(&leg, &vocab, &train_corpus, &dev_corpus, &model_cfg)?;
        report.save_tsv(leg.out_dir.join("train_report.tsv"))?;
        leg.write_resolved(leg.out_dir.join("train.resolved.cfg"))?;

        let greedy = evaluate(&params, &model_cfg, &test_corpus, SearchKind::Greedy)?;
        let beam = evaluate(
            &params,
            &model_cfg,
            &test_corpus,
            SearchKind::Beam(cfg.beam_width),
        )?;
        table.push_str(&format!(
            "{label}\t{alpha}\t{:.2}\t{:.2}\t{:.2}\n",
            report.best_dev_bleu, greedy, beam
        ));
        println!(
            "{label}: best dev {:.2}, test greedy {:.2}, test beam {:.2}",
            report.best_dev_bleu, greedy, beam
        );
    }

    fs::create_dir_all(&cfg.out_dir)?;
    let table_path = cfg.out_dir.join("sweep.tsv");
    fs::write(&table_path, &table)?;
    cfg.write_resolved(cfg.out_dir.join("sweep.resolved.cfg"))?;
    println!("wrote {}", table_path.display());
    Ok(())
}
