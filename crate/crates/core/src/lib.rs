//! Training sequence models by minimizing alpha-divergences between the
//! model and a reward-induced payoff distribution.
//!
//! The crate is organized bottom-up:
//!
//! - [`data`]: vocabulary, parallel corpora, synthetic task generation, and
//!   deterministic batching.
//! - [`rewards`]: negative Hamming distance rewards and corpus BLEU.
//! - [`augment`]: edit-ball sampling around reference targets, the exact
//!   proposal density, and exhaustive ball enumeration for oracles.
//! - [`objectives`]: the alpha-divergence family, self-normalized
//!   importance weights, the sampled surrogate loss, and exact oracles.
//! - [`model`]: a recurrent encoder-decoder with attention, with forward,
//!   hand-derived backward, scoring, and decoding.
//! - [`trainer`]: the training loop with step-size decay on dev BLEU.
//! - [`verify`]: named self-check suites over the math, the model
//!   gradients, and the exact oracles.
//!
//! Everything is deterministic given the configured seeds: random draws go
//! through named [`rng`] streams, so augmentation, initialization, and
//! shuffling reproduce exactly across runs and machines.

pub mod augment;
pub mod data;
pub mod error;
pub mod model;
pub mod objectives;
pub mod rewards;
pub mod rng;
pub mod trainer;
pub mod verify;

pub use augment::{AugmentConfig, AugmentedSample};
pub use data::{ParallelCorpus, Sentence, Split, SyntheticTaskSpec, TaskKind, Vocab};
pub use error::{Error, Result};
pub use model::{GradientEstimate, ModelConfig, Parameters};
pub use objectives::{FiniteDist, ObjectiveConfig, ObjectiveKind, WeightedBatch};
pub use rewards::{corpus_bleu, HammingReward, Reward, RewardFn};
pub use rng::{pack_pair_epoch, stream_rng, StreamKind};
pub use trainer::{evaluate, train, SearchKind, TrainConfig, TrainReport};
pub use verify::{run_all_suites, run_grad_suite, run_math_suite, run_oracle_suite, CheckResult};
