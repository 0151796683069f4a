//! Training objectives: the alpha-divergence family, importance weights for
//! its sampled surrogate, and exact oracles over enumerated supports.

mod math;
mod oracle;
mod weights;

pub use math::{
    alpha_divergence, generalized_log, log_softmax, log_sum_exp, FiniteDist, KahanSum,
    ALPHA_ENDPOINT_DELTA,
};
pub use oracle::{
    ball_as_uniform_samples, cosine_similarity, oracle_gradient_alpha, oracle_gradient_entropy_reg,
    oracle_gradient_raml, oracle_objectives, payoff_distribution, relative_l2_distance,
    ObjectiveValues, SoftmaxModel,
};
pub use weights::{
    normalize_log_weights, raw_log_weight, surrogate_loss, weight_batch, ObjectiveConfig,
    ObjectiveKind, ScoredContext, WeightedBatch, WeightedContext, WeightedSample,
};
