//! Domain types shared by search, heuristics, datasets and evaluation.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::error::Error;
pub use crate::text::normalize;

/// Opaque statement identifier. Identity is never derived from text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StatementId(pub u32);

impl fmt::Display for StatementId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Premise,
    /// Conclusion of the step with this (1-based) index.
    Derived(u32),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Statement {
    pub id: StatementId,
    pub text: String,
    pub normalized: String,
    pub provenance: Provenance,
}

impl Statement {
    pub fn premise(id: u32, text: impl Into<String>) -> Self {
        let text = text.into();
        Self { id: StatementId(id), normalized: normalize(&text), text, provenance: Provenance::Premise }
    }

    /// Panics if `step_index` is zero; step indices are 1-based.
    pub fn derived(id: u32, text: impl Into<String>, step_index: u32) -> Self {
        assert!(step_index >= 1, "derived statements carry a 1-based step index");
        let text = text.into();
        Self {
            id: StatementId(id),
            normalized: normalize(&text),
            text,
            provenance: Provenance::Derived(step_index),
        }
    }

    pub fn is_premise(&self) -> bool {
        self.provenance == Provenance::Premise
    }
}

/// Builds premise statements with ids `0..n` in order.
pub fn premises_from_texts<S: AsRef<str>>(texts: &[S]) -> Vec<Statement> {
    texts.iter().enumerate().map(|(i, t)| Statement::premise(i as u32, t.as_ref())).collect()
}

/// The hypothesis to derive. Never empty.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Goal(String);

impl Goal {
    pub fn new(text: impl Into<String>) -> Result<Self, Error> {
        let text = text.into();
        if text.trim().is_empty() {
            return Err(Error::Config("goal text is empty".to_string()));
        }
        Ok(Self(text))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for Goal {
    type Error = Error;
    fn try_from(value: String) -> Result<Self, Self::Error> {
        Goal::new(value)
    }
}

impl From<Goal> for String {
    fn from(goal: Goal) -> Self {
        goal.0
    }
}

impl fmt::Display for Goal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// An unordered statement pair waiting in the fringe.
///
/// Ordering is the fringe priority: higher score first, and among equal
/// scores the lower insertion sequence number.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Candidate {
    pub a: StatementId,
    pub b: StatementId,
    pub score: f64,
    pub seq: u64,
}

impl Candidate {
    /// Stores the pair in canonical order (lower id first). `None` if `x == y`.
    pub fn new(x: StatementId, y: StatementId, score: f64, seq: u64) -> Option<Self> {
        match x.cmp(&y) {
            Ordering::Less => Some(Self { a: x, b: y, score, seq }),
            Ordering::Greater => Some(Self { a: y, b: x, score, seq }),
            Ordering::Equal => None,
        }
    }

    pub fn pair(&self) -> (StatementId, StatementId) {
        (self.a, self.b)
    }
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.score.total_cmp(&other.score).then_with(|| other.seq.cmp(&self.seq))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeductionStep {
    pub inputs: [StatementId; 2],
    pub conclusion: Statement,
    pub index: u32,
    pub heuristic_score: f64,
    pub goal_entail_score: f64,
}

/// Binary tree of steps rooted at `root`; `steps` are in increasing index order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntailmentTree {
    pub root: StatementId,
    pub steps: Vec<DeductionStep>,
    pub leaves: Vec<StatementId>,
}

impl EntailmentTree {
    /// Checks the structural invariants: each internal node is produced by
    /// exactly one step, inputs are leaves or earlier conclusions, the root
    /// is the last conclusion, and every leaf is used.
    pub fn is_well_formed(&self) -> bool {
        let Some(last) = self.steps.last() else { return false };
        if last.conclusion.id != self.root {
            return false;
        }
        let leaves: BTreeSet<_> = self.leaves.iter().copied().collect();
        if leaves.len() != self.leaves.len() {
            return false;
        }
        let mut produced = BTreeSet::new();
        let mut used = BTreeSet::new();
        let mut prev_index = 0;
        for step in &self.steps {
            if step.index <= prev_index || step.conclusion.provenance != Provenance::Derived(step.index) {
                return false;
            }
            prev_index = step.index;
            for input in step.inputs {
                if !(leaves.contains(&input) || produced.contains(&input)) {
                    return false;
                }
                used.insert(input);
            }
            if step.inputs[0] == step.inputs[1]
                || leaves.contains(&step.conclusion.id)
                || !produced.insert(step.conclusion.id)
            {
                return false;
            }
        }
        leaves.is_subset(&used)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProofStatus {
    Proved,
    Exhausted,
    StepBudgetReached,
}

impl fmt::Display for ProofStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProofStatus::Proved => "proved",
            ProofStatus::Exhausted => "exhausted",
            ProofStatus::StepBudgetReached => "step_budget_reached",
        })
    }
}

/// Outcome of one search, including the full forest of accepted steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProofResult {
    pub status: ProofStatus,
    pub premises: Vec<Statement>,
    pub goal: Goal,
    pub forest: Vec<DeductionStep>,
    pub tree: Option<EntailmentTree>,
    pub steps_expanded: u32,
    /// Candidates ever pushed into the fringe, including the initial pairs.
    pub candidates_enqueued: usize,
    /// Fringe pops, duplicates included.
    pub pops: usize,
}

impl ProofResult {
    pub fn statement(&self, id: StatementId) -> Option<&Statement> {
        self.premises
            .iter()
            .find(|s| s.id == id)
            .or_else(|| self.forest.iter().map(|s| &s.conclusion).find(|s| s.id == id))
    }

    /// Highest goal-entailment score over all derived conclusions, 0 if none.
    pub fn best_entail_score(&self) -> f64 {
        self.forest.iter().map(|s| s.goal_entail_score).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchConfig {
    pub max_steps: u32,
    pub alpha: f64,
    pub top_p: f64,
    pub rng_seed: u64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self { max_steps: 20, alpha: 0.81, top_p: 0.9, rng_seed: 0 }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<(), Error> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::Config(alloc::format!("alpha {} outside [0, 1]", self.alpha)));
        }
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return Err(Error::Config(alloc::format!("top_p {} outside (0, 1]", self.top_p)));
        }
        Ok(())
    }
}

/// Minimal sub-forest reachable backward from `root`.
pub fn extract_tree(forest: &[DeductionStep], root: StatementId) -> Result<EntailmentTree, Error> {
    let by_conclusion: BTreeMap<StatementId, &DeductionStep> =
        forest.iter().map(|s| (s.conclusion.id, s)).collect();
    if !by_conclusion.contains_key(&root) {
        return Err(Error::NotDerived(root));
    }
    let mut needed: BTreeMap<u32, &DeductionStep> = BTreeMap::new();
    let mut leaves = BTreeSet::new();
    let mut stack = alloc::vec![root];
    while let Some(id) = stack.pop() {
        match by_conclusion.get(&id) {
            Some(step) => {
                if needed.insert(step.index, step).is_none() {
                    stack.extend(step.inputs);
                }
            }
            None => {
                leaves.insert(id);
            }
        }
    }
    Ok(EntailmentTree {
        root,
        steps: needed.into_values().cloned().collect(),
        leaves: leaves.into_iter().collect(),
    })
}
