//! Multi-head linear attention parameters, evaluation and autoregressive rollout.

mod params;
mod sequence;

pub use params::{Head, MhlaParams, DEFAULT_RANK_TOL};
pub use sequence::{one_hot, rollout, rollout_with, round_token, ComputationHistory, Vocabulary};
