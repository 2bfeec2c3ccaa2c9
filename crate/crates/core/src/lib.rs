//! Best-first search over pairwise deduction steps.
//!
//! A search starts from a set of natural-language premises and a goal. Pairs
//! of statements sit in a max-heap fringe ordered by a pluggable heuristic;
//! each popped pair is handed to a step backend that produces one conclusion,
//! and every new conclusion is checked against the goal by a thresholded
//! entailment gate. A successful search yields a binary entailment tree whose
//! leaves are premises.
//!
//! The crate is `no_std` and only needs `alloc`. Model backends are traits;
//! [`synthetic`] provides a deterministic symbolic backend together with a
//! forward-chaining closure oracle, which is what the test suites run against.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod backend;
pub mod calibration;
pub mod dataset;
mod error;
pub mod gate;
pub mod heuristics;
pub mod metrics;
pub mod rng;
pub mod search;
pub mod synthetic;
pub mod text;
pub mod types;

pub use backend::{BackendError, EntailmentBackend, PairScoreBackend, StepBackend};
pub use error::Error;
pub use gate::{gate, GateDecision};
pub use heuristics::{Heuristic, HeuristicKind};
pub use search::{scsearch, scsearch_observed, SearchError, SearchEvent};
pub use types::{
    extract_tree, normalize, Candidate, DeductionStep, EntailmentTree, Goal, ProofResult,
    ProofStatus, Provenance, SearchConfig, Statement, StatementId,
};

pub type Result<T, E = Error> = core::result::Result<T, E>;
