//! Encoder-decoder sequence model with hand-derived gradients.
//!
//! A bidirectional GRU encoder feeds a GRU decoder through bilinear
//! attention. Everything runs in f64 on plain row-major tensors, and the
//! backward pass is written out by hand so gradient checks can pin the
//! whole network against finite differences.

mod decode;
mod net;
mod params;
mod score;
mod tensor;

pub use decode::{ancestral_sample, beam_decode, greedy_decode};
pub use params::{AttentionKind, GradientEstimate, GruWeights, ModelConfig, Parameters};
pub use score::{
    accumulate_gradient, forward_cached, grad_weighted_nll, log_prob, step_log_distributions,
    ScoredSequence,
};
pub use tensor::Tensor;
