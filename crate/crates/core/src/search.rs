//! Best-first search over statement pairs.
//!
//! The fringe starts with every unordered premise pair. Each iteration pops
//! the highest-priority pair, samples exactly one conclusion for it and, if
//! the conclusion is new, records a step and checks it against the goal. A
//! conclusion that does not prove the goal is paired with every premise and
//! every earlier conclusion. Duplicate conclusions are dropped without
//! consuming step budget.

use alloc::boxed::Box;
use alloc::collections::{BTreeMap, BTreeSet, BinaryHeap};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::backend::{EntailmentBackend, StepBackend};
use crate::error::Error;
use crate::gate::gate;
use crate::heuristics::Heuristic;
use crate::rng;
use crate::types::{
    extract_tree, normalize, Candidate, DeductionStep, Goal, ProofResult, ProofStatus, SearchConfig, Statement,
    StatementId,
};

/// Max-heap of candidate pairs; a canonical pair enters at most once.
#[derive(Debug, Default)]
pub struct Fringe {
    heap: BinaryHeap<Candidate>,
    members: BTreeSet<(StatementId, StatementId)>,
    next_seq: u64,
}

impl Fringe {
    pub fn new() -> Self {
        Self::default()
    }

    /// Sequence number the next accepted push will receive.
    pub fn next_seq(&self) -> u64 {
        self.next_seq
    }

    pub fn contains(&self, x: StatementId, y: StatementId) -> bool {
        self.members.contains(&(x.min(y), x.max(y)))
    }

    /// Returns `false` (and changes nothing) for self-pairs and for pairs
    /// that were ever enqueued before.
    pub fn push(&mut self, x: StatementId, y: StatementId, score: f64) -> bool {
        let Some(c) = Candidate::new(x, y, score, self.next_seq) else { return false };
        if !self.members.insert(c.pair()) {
            return false;
        }
        self.next_seq += 1;
        self.heap.push(c);
        true
    }

    pub fn pop(&mut self) -> Option<Candidate> {
        self.heap.pop()
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    /// Pairs ever enqueued.
    pub fn enqueued(&self) -> usize {
        self.members.len()
    }
}

/// Normalized texts of every statement seen so far.
#[derive(Debug, Default)]
pub struct VisitedSet(BTreeSet<String>);

impl VisitedSet {
    pub fn insert(&mut self, normalized: String) -> bool {
        self.0.insert(normalized)
    }

    pub fn contains(&self, normalized: &str) -> bool {
        self.0.contains(normalized)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Debug, Clone, Copy)]
pub enum SearchEvent<'a> {
    /// A pair left the fringe and is about to be sampled.
    Popped(&'a Candidate),
    /// The sampled conclusion was already known; the pair is spent.
    Duplicate { candidate: &'a Candidate, conclusion: &'a str },
    /// A new step was accepted.
    Step(&'a DeductionStep),
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SearchError {
    #[error(transparent)]
    Invalid(Error),
    /// A backend failed mid-search; `partial` holds everything derived so far.
    #[error("search aborted after {} step(s): {error}", partial.steps_expanded)]
    Aborted { error: Error, partial: Box<ProofResult> },
}

impl SearchError {
    pub fn error(&self) -> &Error {
        match self {
            SearchError::Invalid(e) | SearchError::Aborted { error: e, .. } => e,
        }
    }
}

pub fn scsearch<S, E>(
    premises: &[Statement],
    goal: &Goal,
    heuristic: &Heuristic<'_>,
    step_backend: &S,
    entail_backend: &E,
    config: &SearchConfig,
) -> Result<ProofResult, SearchError>
where
    S: StepBackend + ?Sized,
    E: EntailmentBackend + ?Sized,
{
    scsearch_observed(premises, goal, heuristic, step_backend, entail_backend, config, &mut |_| {})
}

struct State<'p> {
    premises: &'p [Statement],
    derived: Vec<Statement>,
    index: BTreeMap<StatementId, usize>,
    forest: Vec<DeductionStep>,
    fringe: Fringe,
    pops: usize,
}

impl State<'_> {
    fn get(&self, id: StatementId) -> &Statement {
        let i = self.index[&id];
        if i < self.premises.len() {
            &self.premises[i]
        } else {
            &self.derived[i - self.premises.len()]
        }
    }

    fn enqueue(&mut self, x: StatementId, y: StatementId, h: &Heuristic<'_>, goal: &Goal) -> Result<(), Error> {
        let (lo, hi) = (x.min(y), x.max(y));
        if lo == hi || self.fringe.contains(lo, hi) {
            return Ok(());
        }
        let score = h.score(self.get(lo), self.get(hi), self.fringe.next_seq(), Some(goal))?;
        self.fringe.push(lo, hi, score);
        Ok(())
    }

    fn finish(self, status: ProofStatus, goal: &Goal, steps_expanded: u32) -> ProofResult {
        let tree = match status {
            ProofStatus::Proved => {
                let root = self.forest.last().expect("proved searches have a step").conclusion.id;
                Some(extract_tree(&self.forest, root).expect("root is in the forest"))
            }
            _ => None,
        };
        ProofResult {
            status,
            premises: self.premises.to_vec(),
            goal: goal.clone(),
            candidates_enqueued: self.fringe.enqueued(),
            pops: self.pops,
            forest: self.forest,
            tree,
            steps_expanded,
        }
    }
}

/// Runs the search, reporting every pop, duplicate and accepted step to
/// `observer` as it happens.
pub fn scsearch_observed<S, E>(
    premises: &[Statement],
    goal: &Goal,
    heuristic: &Heuristic<'_>,
    step_backend: &S,
    entail_backend: &E,
    config: &SearchConfig,
    observer: &mut dyn FnMut(SearchEvent<'_>),
) -> Result<ProofResult, SearchError>
where
    S: StepBackend + ?Sized,
    E: EntailmentBackend + ?Sized,
{
    config.validate().map_err(SearchError::Invalid)?;
    if premises.len() < 2 {
        return Err(SearchError::Invalid(Error::Config(format!(
            "search needs at least 2 premises, got {}",
            premises.len()
        ))));
    }
    let mut index = BTreeMap::new();
    let mut visited = VisitedSet::default();
    for (i, p) in premises.iter().enumerate() {
        if !p.is_premise() || index.insert(p.id, i).is_some() {
            return Err(SearchError::Invalid(Error::Config(format!("bad premise {} ({:?})", p.id, p.text))));
        }
        visited.insert(p.normalized.clone());
    }
    let mut next_id = premises.iter().map(|p| p.id.0).max().unwrap_or(0) + 1;

    let mut st = State { premises, derived: Vec::new(), index, forest: Vec::new(), fringe: Fringe::new(), pops: 0 };

    macro_rules! abort {
        ($st:expr, $err:expr, $steps:expr) => {{
            let error: Error = $err;
            return Err(SearchError::Aborted { error, partial: Box::new($st.finish(ProofStatus::Exhausted, goal, $steps)) });
        }};
    }

    for i in 0..premises.len() {
        for j in i + 1..premises.len() {
            if let Err(e) = st.enqueue(premises[i].id, premises[j].id, heuristic, goal) {
                abort!(st, e, 0);
            }
        }
    }

    let mut step_index: u32 = 1;
    loop {
        if step_index > config.max_steps {
            return Ok(st.finish(ProofStatus::StepBudgetReached, goal, step_index - 1));
        }
        let Some(candidate) = st.fringe.pop() else {
            return Ok(st.finish(ProofStatus::Exhausted, goal, step_index - 1));
        };
        st.pops += 1;
        observer(SearchEvent::Popped(&candidate));

        let seed = rng::mix(config.rng_seed, st.pops as u64);
        let sampled = step_backend.sample_conclusion(st.get(candidate.a), st.get(candidate.b), config.top_p, seed);
        let text = match sampled {
            Ok(t) => t,
            Err(e) => abort!(st, e.into(), step_index - 1),
        };
        if !visited.insert(normalize(&text)) {
            observer(SearchEvent::Duplicate { candidate: &candidate, conclusion: &text });
            continue;
        }

        let conclusion = Statement::derived(next_id, text, step_index);
        next_id += 1;
        let decision = match gate(&conclusion, goal, entail_backend, config.alpha) {
            Ok(d) => d,
            Err(e) => abort!(st, e, step_index - 1),
        };
        let new_id = conclusion.id;
        st.index.insert(new_id, premises.len() + st.derived.len());
        st.derived.push(conclusion.clone());
        st.forest.push(DeductionStep {
            inputs: [candidate.a, candidate.b],
            conclusion,
            index: step_index,
            heuristic_score: candidate.score,
            goal_entail_score: decision.score,
        });
        observer(SearchEvent::Step(st.forest.last().unwrap()));

        if decision.entails {
            return Ok(st.finish(ProofStatus::Proved, goal, step_index));
        }

        let partners: Vec<StatementId> =
            premises.iter().map(|p| p.id).chain(st.derived.iter().map(|d| d.id).filter(|&id| id != new_id)).collect();
        for other in partners {
            if let Err(e) = st.enqueue(other, new_id, heuristic, goal) {
                abort!(st, e, step_index);
            }
        }
        step_index += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::{BackendError, PairScoreBackend};
    use crate::heuristics::HeuristicKind;
    use crate::synthetic::SyntheticBackend;
    use crate::types::premises_from_texts;
    use alloc::string::ToString;
    use alloc::vec;
    use core::cell::Cell;

    fn goal(s: &str) -> Goal {
        Goal::new(s).unwrap()
    }

    fn run(premises: &[&str], g: &str, kind: HeuristicKind, max_steps: u32) -> ProofResult {
        let syn = SyntheticBackend::for_premises(premises);
        let h = Heuristic::from_kind(kind, &syn, &syn);
        let config = SearchConfig { max_steps, ..Default::default() };
        scsearch(&premises_from_texts(premises), &goal(g), &h, &syn, &syn, &config).unwrap()
    }

    #[test]
    fn fringe_orders_by_score_then_seq() {
        let mut f = Fringe::new();
        assert!(f.push(StatementId(0), StatementId(1), 1.0));
        assert!(f.push(StatementId(2), StatementId(0), 3.0));
        assert!(f.push(StatementId(1), StatementId(2), 3.0));
        assert!(!f.push(StatementId(0), StatementId(2), 9.0));
        assert!(!f.push(StatementId(4), StatementId(4), 9.0));
        assert_eq!(f.pop().unwrap().pair(), (StatementId(0), StatementId(2)));
        assert_eq!(f.pop().unwrap().pair(), (StatementId(1), StatementId(2)));
        assert_eq!(f.pop().unwrap().pair(), (StatementId(0), StatementId(1)));
        assert!(f.pop().is_none());
        assert!(!f.push(StatementId(1), StatementId(0), 0.0), "popped pairs never re-enter");
        assert_eq!(f.enqueued(), 3);
    }

    #[test]
    fn one_step_proof_under_every_heuristic() {
        for kind in HeuristicKind::ALL {
            let r = run(&["cats are mammals", "mammals have fur"], "cats have fur", kind, 20);
            assert_eq!(r.status, ProofStatus::Proved, "{kind}");
            assert_eq!(r.steps_expanded, 1);
            let tree = r.tree.unwrap();
            assert_eq!(tree.steps.len(), 1);
            assert_eq!(tree.leaves.len(), 2);
            assert!(tree.is_well_formed());
        }
    }

    #[test]
    fn underivable_goal_is_never_proved() {
        for kind in HeuristicKind::ALL {
            let r = run(&["cats are mammals", "mammals have fur"], "dogs have fur", kind, 20);
            assert_ne!(r.status, ProofStatus::Proved);
            assert!(r.tree.is_none());
        }
    }

    #[test]
    fn zero_budget() {
        let r = run(&["cats are mammals", "mammals have fur"], "cats have fur", HeuristicKind::BreadthFirst, 0);
        assert_eq!(r.status, ProofStatus::StepBudgetReached);
        assert!(r.forest.is_empty());
        assert_eq!(r.steps_expanded, 0);
    }

    #[test]
    fn budget_is_respected() {
        let premises = ["a are b", "b are c", "c are d", "d are e", "e are f", "f have p"];
        let r = run(&premises, "x have q", HeuristicKind::BreadthFirst, 3);
        assert_eq!(r.status, ProofStatus::StepBudgetReached);
        assert_eq!(r.steps_expanded, 3);
        assert_eq!(r.forest.len(), 3);
    }

    #[test]
    fn breadth_first_pops_premise_pairs_first() {
        let premises = premises_from_texts(&["a are b", "b are c", "c have p"]);
        let syn = SyntheticBackend::new();
        let mut popped = Vec::new();
        let config = SearchConfig { max_steps: 100, ..Default::default() };
        let r = scsearch_observed(&premises, &goal("z have q"), &Heuristic::BreadthFirst, &syn, &syn, &config, &mut |e| {
            if let SearchEvent::Popped(c) = e {
                popped.push(c.pair());
            }
        })
        .unwrap();
        assert_eq!(r.status, ProofStatus::Exhausted);
        let premise_ids: Vec<bool> = popped.iter().map(|(a, b)| a.0 < 3 && b.0 < 3).collect();
        assert_eq!(&premise_ids[..3], &[true, true, true]);
        assert!(premise_ids[3..].iter().all(|p| !p));
        // the three premise pairs pop in insertion order
        assert_eq!(&popped[..3], &[(StatementId(0), StatementId(1)), (StatementId(0), StatementId(2)), (StatementId(1), StatementId(2))]);
        // saturation: a are c, b have p, a have p
        assert_eq!(r.forest.len(), 3);
    }

    #[test]
    fn initial_fringe_is_all_pairs() {
        for n in 2..=10usize {
            let texts: Vec<String> = (0..n).map(|i| alloc::format!("unrelated statement {i}")).collect();
            let premises = premises_from_texts(&texts);
            let syn = SyntheticBackend::new();
            let config = SearchConfig { max_steps: 0, ..Default::default() };
            let r = scsearch(&premises, &goal("g"), &Heuristic::Overlap, &syn, &syn, &config).unwrap();
            assert_eq!(r.candidates_enqueued, n * (n - 1) / 2);
        }
    }

    #[test]
    fn rejects_too_few_premises() {
        let syn = SyntheticBackend::new();
        let premises = premises_from_texts(&["only one"]);
        let r = scsearch(&premises, &goal("g"), &Heuristic::BreadthFirst, &syn, &syn, &SearchConfig::default());
        assert!(matches!(r, Err(SearchError::Invalid(Error::Config(_)))));
    }

    struct Flaky {
        fail_after: usize,
        calls: Cell<usize>,
    }

    impl StepBackend for Flaky {
        fn sample_conclusion(&self, x1: &Statement, x2: &Statement, _: f64, _: u64) -> Result<String, BackendError> {
            let n = self.calls.get();
            self.calls.set(n + 1);
            if n >= self.fail_after {
                return Err(BackendError::Unavailable("connection refused".to_string()));
            }
            Ok(alloc::format!("{} and {}", x1.text, x2.text))
        }
        fn repeat_logprob(&self, _: &Statement, _: &Statement) -> Result<f64, BackendError> {
            Ok(0.0)
        }
    }

    #[test]
    fn backend_failure_keeps_partial_forest() {
        let premises = premises_from_texts(&["a", "b", "c"]);
        let step = Flaky { fail_after: 2, calls: Cell::new(0) };
        let syn = SyntheticBackend::new();
        let r = scsearch(&premises, &goal("zzz"), &Heuristic::BreadthFirst, &step, &syn, &SearchConfig::default());
        match r {
            Err(SearchError::Aborted { error: Error::Backend(BackendError::Unavailable(_)), partial }) => {
                assert_eq!(partial.forest.len(), 2);
                assert_eq!(partial.steps_expanded, 2);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    struct Broken;

    impl PairScoreBackend for Broken {
        fn pair_score(&self, _: &Statement, _: &Statement, _: Option<&Goal>) -> Result<f64, BackendError> {
            Err(BackendError::Protocol("garbage".to_string()))
        }
    }

    #[test]
    fn heuristic_failure_aborts_during_initialization() {
        let premises = premises_from_texts(&["a", "b"]);
        let syn = SyntheticBackend::new();
        let r = scsearch(&premises, &goal("g"), &Heuristic::Learned(&Broken), &syn, &syn, &SearchConfig::default());
        assert!(matches!(r, Err(SearchError::Aborted { .. })));
    }

    #[test]
    fn duplicates_do_not_consume_budget() {
        // every pair is incompatible: all samples are copies of known premises
        let r = run(&["x1 y", "x2 y", "x3 y", "x4 y"], "g", HeuristicKind::BreadthFirst, 1);
        assert_eq!(r.status, ProofStatus::Exhausted);
        assert_eq!(r.pops, 6);
        assert_eq!(r.steps_expanded, 0);
    }

    #[test]
    fn fringe_growth_matches_pairing_rule() {
        let premises = ["a are b", "b are c", "c are d", "d have p", "q are r"];
        let r = run(&premises, "nothing here", HeuristicKind::BreadthFirst, 100);
        let n = premises.len();
        let k = r.steps_expanded as usize;
        let bound = n * (n - 1) / 2 + (1..=k).map(|i| n + i - 1).sum::<usize>();
        assert_eq!(r.candidates_enqueued, bound);
        let mut seen = BTreeSet::new();
        assert!(r.forest.iter().all(|s| seen.insert(s.conclusion.normalized.clone())));
        let _ = vec![0];
    }
}
