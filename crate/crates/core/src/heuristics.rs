//! Fringe priorities `h({x1, x2}, g)`. Higher scores are expanded sooner.

use alloc::format;
use alloc::string::ToString;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::backend::{PairScoreBackend, StepBackend};
use crate::error::Error;
use crate::text::content_tokens;
use crate::types::{Candidate, Goal, Statement};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeuristicKind {
    BreadthFirst,
    Overlap,
    OverlapGoal,
    Repetition,
    Learned,
    LearnedGoal,
}

impl HeuristicKind {
    pub const ALL: [HeuristicKind; 6] = [
        HeuristicKind::BreadthFirst,
        HeuristicKind::Overlap,
        HeuristicKind::OverlapGoal,
        HeuristicKind::Repetition,
        HeuristicKind::Learned,
        HeuristicKind::LearnedGoal,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            HeuristicKind::BreadthFirst => "breadth_first",
            HeuristicKind::Overlap => "overlap",
            HeuristicKind::OverlapGoal => "overlap_goal",
            HeuristicKind::Repetition => "repetition",
            HeuristicKind::Learned => "learned",
            HeuristicKind::LearnedGoal => "learned_goal",
        }
    }

    pub fn uses_goal(self) -> bool {
        matches!(self, HeuristicKind::OverlapGoal | HeuristicKind::LearnedGoal)
    }
}

impl fmt::Display for HeuristicKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for HeuristicKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        HeuristicKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown heuristic {s:?}")))
    }
}

/// Earlier insertions pop first.
pub fn score_breadth_first(candidate: &Candidate) -> f64 {
    -(candidate.seq as f64)
}

/// Shared content tokens; with a goal, plus the pair's tokens shared with it.
pub fn score_overlap(x1: &Statement, x2: &Statement, goal: Option<&Goal>) -> f64 {
    let a = content_tokens(&x1.text);
    let b = content_tokens(&x2.text);
    let pair = a.intersection(&b).count();
    let with_goal = goal.map_or(0, |g| {
        let g = content_tokens(g.as_str());
        a.union(&b).filter(|t| g.contains(*t)).count()
    });
    (pair + with_goal) as f64
}

/// `−p(x1 | x1, x2)`: pairs the step model would just copy score low.
pub fn score_repetition<S: StepBackend + ?Sized>(x1: &Statement, x2: &Statement, backend: &S) -> Result<f64, Error> {
    Ok(-libm::exp(backend.repeat_logprob(x1, x2)?))
}

pub fn score_learned<P: PairScoreBackend + ?Sized>(
    x1: &Statement,
    x2: &Statement,
    goal: Option<&Goal>,
    goal_conditioned: bool,
    backend: &P,
) -> Result<f64, Error> {
    let goal = if goal_conditioned {
        Some(goal.ok_or_else(|| Error::Config("learned_goal heuristic needs a goal".to_string()))?)
    } else {
        None
    };
    let score = backend.pair_score(x1, x2, goal)?;
    if !score.is_finite() {
        return Err(Error::Backend(crate::BackendError::Protocol(format!("non-finite pair score {score}"))));
    }
    Ok(score)
}

/// A heuristic bound to whatever backend it needs.
#[derive(Clone, Copy)]
pub enum Heuristic<'a> {
    BreadthFirst,
    Overlap,
    OverlapGoal,
    Repetition(&'a dyn StepBackend),
    Learned(&'a dyn PairScoreBackend),
    LearnedGoal(&'a dyn PairScoreBackend),
}

impl fmt::Debug for Heuristic<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_tuple("Heuristic").field(&self.kind()).finish()
    }
}

impl<'a> Heuristic<'a> {
    pub fn from_kind(kind: HeuristicKind, step: &'a dyn StepBackend, pair: &'a dyn PairScoreBackend) -> Self {
        match kind {
            HeuristicKind::BreadthFirst => Heuristic::BreadthFirst,
            HeuristicKind::Overlap => Heuristic::Overlap,
            HeuristicKind::OverlapGoal => Heuristic::OverlapGoal,
            HeuristicKind::Repetition => Heuristic::Repetition(step),
            HeuristicKind::Learned => Heuristic::Learned(pair),
            HeuristicKind::LearnedGoal => Heuristic::LearnedGoal(pair),
        }
    }

    pub fn kind(&self) -> HeuristicKind {
        match self {
            Heuristic::BreadthFirst => HeuristicKind::BreadthFirst,
            Heuristic::Overlap => HeuristicKind::Overlap,
            Heuristic::OverlapGoal => HeuristicKind::OverlapGoal,
            Heuristic::Repetition(_) => HeuristicKind::Repetition,
            Heuristic::Learned(_) => HeuristicKind::Learned,
            Heuristic::LearnedGoal(_) => HeuristicKind::LearnedGoal,
        }
    }

    pub fn uses_goal(&self) -> bool {
        self.kind().uses_goal()
    }

    /// Scores the candidate pair `x1, x2` (canonical order) enqueued with
    /// sequence number `seq`. Goal-free heuristics never look at `goal`.
    pub fn score(&self, x1: &Statement, x2: &Statement, seq: u64, goal: Option<&Goal>) -> Result<f64, Error> {
        let goal = if self.uses_goal() { goal } else { None };
        match self {
            Heuristic::BreadthFirst => {
                let c = Candidate { a: x1.id, b: x2.id, score: 0.0, seq };
                Ok(score_breadth_first(&c))
            }
            Heuristic::Overlap | Heuristic::OverlapGoal => Ok(score_overlap(x1, x2, goal)),
            Heuristic::Repetition(b) => score_repetition(x1, x2, *b),
            Heuristic::Learned(b) => score_learned(x1, x2, None, false, *b),
            Heuristic::LearnedGoal(b) => score_learned(x1, x2, goal, true, *b),
        }
    }
}
