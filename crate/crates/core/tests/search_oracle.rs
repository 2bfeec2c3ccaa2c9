//! Search behaviour checked against the forward-chaining closure oracle.

use std::collections::BTreeSet;

use deduce_core::dataset::{Example, GoalLabel};
use deduce_core::synthetic::{self, SyntheticBackend};
use deduce_core::{scsearch, scsearch_observed, Heuristic, HeuristicKind, ProofResult, ProofStatus, SearchConfig, SearchEvent};

fn search(e: &Example, kind: HeuristicKind, max_steps: u32) -> ProofResult {
    let backend = SyntheticBackend::for_premises(&e.premises);
    let h = Heuristic::from_kind(kind, &backend, &backend);
    let config = SearchConfig { max_steps, ..Default::default() };
    scsearch(&e.premise_statements(), &e.goal().unwrap(), &h, &backend, &backend, &config).unwrap()
}

#[test]
fn proved_iff_goal_in_closure() {
    let mut examples = synthetic::suite(20, &[1, 2, 3, 4], 6, None, 11).unwrap();
    examples.extend(synthetic::suite(10, &[2, 4], 10, None, 12).unwrap());
    let oracle = synthetic::closure_membership(&examples).unwrap();
    for e in &examples {
        let r = search(e, HeuristicKind::BreadthFirst, 100_000);
        assert_eq!(r.status == ProofStatus::Proved, oracle[&e.id], "{}", e.id);
        assert_eq!(oracle[&e.id], e.label == GoalLabel::ValidGoal, "{}", e.id);
        if let Some(tree) = &r.tree {
            assert!(tree.is_well_formed());
            assert_eq!(deduce_core::normalize(&r.statement(tree.root).unwrap().text), deduce_core::normalize(&e.goal));
        }
    }
}

#[test]
fn every_heuristic_saturates_to_the_same_set() {
    let examples = synthetic::suite(8, &[2, 3], 5, None, 5).unwrap();
    for e in examples.iter().filter(|e| e.label == GoalLabel::InvalidGoal) {
        let mut sets = Vec::new();
        for kind in HeuristicKind::ALL {
            let r = search(e, kind, 100_000);
            assert_eq!(r.status, ProofStatus::Exhausted, "{} {kind}", e.id);
            let set: BTreeSet<String> = r.forest.iter().map(|s| s.conclusion.normalized.clone()).collect();
            assert_eq!(set.len(), r.forest.len(), "duplicate conclusion under {kind}");
            sets.push(set);
        }
        assert!(sets.windows(2).all(|w| w[0] == w[1]), "{}", e.id);
        // and the saturated set is the closure minus the premises
        let premises = synthetic::facts_of(&e.premises);
        let closed = synthetic::closure(&premises, synthetic::CLOSURE_LIMIT).unwrap();
        let derived: BTreeSet<String> = closed.difference(&premises).map(|f| deduce_core::normalize(&synthetic::render(f))).collect();
        assert_eq!(sets[0], derived);
    }
}

fn median_steps(examples: &[Example], kind: HeuristicKind, max_steps: u32) -> f64 {
    let mut steps: Vec<u32> = examples
        .iter()
        .map(|e| {
            let r = search(e, kind, max_steps);
            if r.status == ProofStatus::Proved { r.steps_expanded } else { max_steps + 1 }
        })
        .collect();
    steps.sort_unstable();
    let m = steps.len() / 2;
    if steps.len() % 2 == 1 { f64::from(steps[m]) } else { f64::from(steps[m - 1] + steps[m]) / 2.0 }
}

#[test]
fn goal_guidance_needs_fewer_steps_among_distractors() {
    let examples: Vec<Example> = synthetic::suite(50, &[2, 3, 4], 0, Some(25), 3)
        .unwrap()
        .into_iter()
        .filter(|e| e.label == GoalLabel::ValidGoal)
        .collect();
    let guided = median_steps(&examples, HeuristicKind::LearnedGoal, 20);
    let blind = median_steps(&examples, HeuristicKind::BreadthFirst, 20);
    assert!(guided < blind, "learned_goal {guided} vs breadth_first {blind}");
}

#[test]
fn goal_free_heuristics_yield_goal_independent_streams() {
    let examples = synthetic::suite(3, &[3], 6, None, 9).unwrap();
    let base = &examples[0];
    let goals = ["zzz have qqq", "nothing is also called none", &examples[1].goal];
    let backend = SyntheticBackend::for_premises(&base.premises);
    for kind in HeuristicKind::ALL.into_iter().filter(|k| !k.uses_goal()) {
        let h = Heuristic::from_kind(kind, &backend, &backend);
        let streams: Vec<Vec<(u32, u32, String)>> = goals
            .iter()
            .map(|g| {
                let mut out = Vec::new();
                let config = SearchConfig { max_steps: 50, rng_seed: 4, ..Default::default() };
                let goal = deduce_core::Goal::new(*g).unwrap();
                scsearch_observed(&base.premise_statements(), &goal, &h, &backend, &backend, &config, &mut |e| {
                    if let SearchEvent::Step(s) = e {
                        out.push((s.inputs[0].0, s.inputs[1].0, s.conclusion.text.clone()));
                    }
                })
                .unwrap();
                out
            })
            .collect();
        assert!(!streams[0].is_empty());
        assert!(streams.windows(2).all(|w| w[0] == w[1]), "{kind}");
    }
}

#[test]
fn fringe_growth_bound_holds_at_every_step() {
    let examples = synthetic::suite(6, &[2, 3, 4], 8, None, 21).unwrap();
    for e in &examples {
        let n = e.premises.len();
        let backend = SyntheticBackend::for_premises(&e.premises);
        let config = SearchConfig { max_steps: 20, ..Default::default() };
        let mut enqueued_at_step = Vec::new();
        let r = scsearch_observed(&e.premise_statements(), &e.goal().unwrap(), &Heuristic::Overlap, &backend, &backend, &config, &mut |ev| {
            if let SearchEvent::Step(s) = ev {
                enqueued_at_step.push(s.index);
            }
        })
        .unwrap();
        let k = r.steps_expanded as usize;
        assert!(k <= 20);
        let bound = n * (n - 1) / 2 + (1..=k).map(|i| n + i - 1).sum::<usize>();
        assert!(r.candidates_enqueued <= bound);
        assert_eq!(enqueued_at_step, (1..=r.forest.len() as u32).collect::<Vec<_>>());
    }
}
