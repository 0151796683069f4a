//! Benchmarks over the per-step hot paths: divergence evaluation, proposal
//! sampling, forward scoring, the weighted gradient, and decoding.

use criterion::{black_box, criterion_group, criterion_main, Criterion};

use adimt_core::augment::draw_samples;
use adimt_core::model::{beam_decode, forward_cached, grad_weighted_nll, greedy_decode};
use adimt_core::objectives::{alpha_divergence, weight_batch, FiniteDist, ScoredContext};
use adimt_core::{
    AugmentConfig, ModelConfig, ObjectiveConfig, ObjectiveKind, Parameters, Sentence, Vocab,
};

const TAU: f64 = 3.0;
const TARGET_LEN: usize = 10;
const SAMPLES_PER_PAIR: usize = 8;

fn bench_vocab() -> Vocab {
    Vocab::new((0..12).map(|i| format!("w{i:02}"))).expect("vocab")
}

/// A deterministic sentence over content ids, cycling through the vocabulary.
fn content_sentence(vocab: &Vocab, len: usize, phase: usize) -> Sentence {
    let ids: Vec<u32> = vocab.content_ids().collect();
    Sentence::new((0..len).map(|i| ids[(i + phase) % ids.len()]).collect())
}

fn bench_params(vocab: &Vocab) -> (Parameters, ModelConfig) {
    let config = ModelConfig::new(vocab.len(), vocab.len());
    let params = Parameters::init(&config).expect("init");
    (params, config)
}

fn augment_config() -> AugmentConfig {
    AugmentConfig {
        tau: TAU,
        samples_per_pair: SAMPLES_PER_PAIR,
        edit_fraction: 0.2,
        seed: 7,
    }
}

fn divergence(c: &mut Criterion) {
    let p = FiniteDist::new(normalized(16, 1)).expect("p");
    let q = FiniteDist::new(normalized(16, 5)).expect("q");

    let mut group = c.benchmark_group("divergence");
    group.bench_function("alpha_0.5_support_16", |b| {
        b.iter(|| alpha_divergence(black_box(&p), black_box(&q), 0.5).expect("divergence"))
    });
    group.bench_function("kl_branch_support_16", |b| {
        b.iter(|| alpha_divergence(black_box(&p), black_box(&q), 1e-9).expect("divergence"))
    });
    group.finish();
}

fn normalized(n: usize, phase: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|i| 1.0 + ((i * 7 + phase) % 13) as f64).collect();
    let total: f64 = raw.iter().sum();
    let mut probs: Vec<f64> = raw.iter().map(|v| v / total).collect();
    let correction = 1.0 - probs.iter().sum::<f64>();
    probs[0] += correction;
    probs
}

fn proposal(c: &mut Criterion) {
    let vocab = bench_vocab();
    let y_star = content_sentence(&vocab, TARGET_LEN, 0);
    let cfg = augment_config();

    let mut group = c.benchmark_group("proposal");
    group.bench_function("draw_8_samples_len_10", |b| {
        let mut epoch = 0usize;
        b.iter(|| {
            epoch += 1;
            draw_samples(black_box(&y_star), &vocab, &cfg, 0, epoch).expect("samples")
        })
    });
    group.finish();
}

fn scoring_and_gradient(c: &mut Criterion) {
    let vocab = bench_vocab();
    let (params, _config) = bench_params(&vocab);
    let source = content_sentence(&vocab, TARGET_LEN, 0);
    let y_star = content_sentence(&vocab, TARGET_LEN, 3);
    let aug = augment_config();
    let objective = ObjectiveConfig { kind: ObjectiveKind::AlphaDimt, alpha: 0.5, tau: TAU };

    let samples = draw_samples(&y_star, &vocab, &aug, 0, 0).expect("samples");
    let scored = ScoredContext {
        pair_id: 0,
        source: source.clone(),
        samples: samples
            .iter()
            .map(|s| {
                let lp = forward_cached(&params, &source, &s.y_tilde).expect("forward").total();
                (s.clone(), Some(lp))
            })
            .collect(),
    };
    let batch = weight_batch(vec![scored], &objective).expect("weights");

    let mut group = c.benchmark_group("model");
    group.bench_function("forward_len_10", |b| {
        b.iter(|| forward_cached(black_box(&params), &source, &y_star).expect("forward"))
    });
    group.bench_function("weighted_gradient_8_samples", |b| {
        b.iter(|| grad_weighted_nll(black_box(&params), &batch).expect("gradient"))
    });
    group.finish();
}

fn decoding(c: &mut Criterion) {
    let vocab = bench_vocab();
    let (params, config) = bench_params(&vocab);
    let source = content_sentence(&vocab, TARGET_LEN, 0);

    let mut group = c.benchmark_group("decode");
    group.bench_function("greedy_len_10", |b| {
        b.iter(|| greedy_decode(black_box(&params), &config, &source).expect("greedy"))
    });
    group.bench_function("beam_10_len_10", |b| {
        b.iter(|| beam_decode(black_box(&params), &config, &source, 10).expect("beam"))
    });
    group.finish();
}

criterion_group!(benches, divergence, proposal, scoring_and_gradient, decoding);
criterion_main!(benches);
