//! Corpus and vocabulary handling: token/id mapping with reserved symbols,
//! line-paired parallel corpora, synthetic copy/reverse task generation, and
//! shuffled fixed-size batching with padding.

mod batch;
mod corpus;
mod synth;
mod vocab;

pub use batch::{batches, Batch};
pub use corpus::{load_corpus, save_corpus, ParallelCorpus, Sentence, Split};
pub use synth::{generate_synthetic, SyntheticCorpora, SyntheticTaskSpec, TaskKind};
pub use vocab::{Vocab, BOS_ID, EOS_ID, PAD_ID, RESERVED_TOKENS};
