//! Model roles consumed by the search.
//!
//! Implementations must be deterministic for a fixed seed and fixed inputs,
//! and must tolerate concurrent calls when shared across evaluations.

use alloc::string::String;

use crate::types::{Goal, Statement};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BackendError {
    #[error("backend unavailable: {0}")]
    Unavailable(String),
    #[error("protocol error: {0}")]
    Protocol(String),
}

/// Generates the conclusion of composing two statements.
pub trait StepBackend {
    /// Draws one conclusion with nucleus mass `top_p` from the stream `seed`.
    fn sample_conclusion(
        &self,
        x1: &Statement,
        x2: &Statement,
        top_p: f64,
        seed: u64,
    ) -> Result<String, BackendError>;

    /// Log-probability (≤ 0) that the backend emits `x1` verbatim given the pair.
    fn repeat_logprob(&self, x1: &Statement, x2: &Statement) -> Result<f64, BackendError>;
}

/// Probability that a premise entails a hypothesis.
pub trait EntailmentBackend {
    fn entail_prob(&self, premise: &Statement, hypothesis: &str) -> Result<f64, BackendError>;
}

/// Learned priority of a candidate pair, optionally goal-conditioned.
pub trait PairScoreBackend {
    fn pair_score(&self, x1: &Statement, x2: &Statement, goal: Option<&Goal>) -> Result<f64, BackendError>;
}

impl<T: StepBackend + ?Sized> StepBackend for &T {
    fn sample_conclusion(&self, x1: &Statement, x2: &Statement, top_p: f64, seed: u64) -> Result<String, BackendError> {
        (**self).sample_conclusion(x1, x2, top_p, seed)
    }

    fn repeat_logprob(&self, x1: &Statement, x2: &Statement) -> Result<f64, BackendError> {
        (**self).repeat_logprob(x1, x2)
    }
}

impl<T: EntailmentBackend + ?Sized> EntailmentBackend for &T {
    fn entail_prob(&self, premise: &Statement, hypothesis: &str) -> Result<f64, BackendError> {
        (**self).entail_prob(premise, hypothesis)
    }
}

impl<T: PairScoreBackend + ?Sized> PairScoreBackend for &T {
    fn pair_score(&self, x1: &Statement, x2: &Statement, goal: Option<&Goal>) -> Result<f64, BackendError> {
        (**self).pair_score(x1, x2, goal)
    }
}
