//! Thresholded goal-entailment decision.

use alloc::format;

use serde::{Deserialize, Serialize};

use crate::backend::EntailmentBackend;
use crate::error::Error;
use crate::types::{Goal, Statement};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GateDecision {
    pub score: f64,
    pub entails: bool,
    pub alpha: f64,
}

impl GateDecision {
    /// The boundary is inclusive: `score == alpha` entails.
    pub fn decide(score: f64, alpha: f64) -> Self {
        Self { score, entails: score >= alpha, alpha }
    }
}

pub fn gate<E: EntailmentBackend + ?Sized>(
    conclusion: &Statement,
    goal: &Goal,
    backend: &E,
    alpha: f64,
) -> Result<GateDecision, Error> {
    if !alpha.is_finite() || alpha < 0.0 {
        return Err(Error::Config(format!("alpha {alpha} must be finite and non-negative")));
    }
    let score = backend.entail_prob(conclusion, goal.as_str())?;
    if !(0.0..=1.0).contains(&score) {
        return Err(Error::Backend(crate::BackendError::Protocol(format!(
            "entailment probability {score} outside [0, 1]"
        ))));
    }
    Ok(GateDecision::decide(score, alpha))
}
