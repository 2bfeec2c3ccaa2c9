//! Examples, gold trees, and the transformations that build training and
//! evaluation data from them.

mod linearize;
mod tfidf;

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::seq::IndexedRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::rng;
use crate::text::normalize;
use crate::types::{premises_from_texts, Goal, Statement};

pub use linearize::{linearize_tree, parse_eb_context, parse_eb_proof, parse_linearized};
pub use tfidf::{cosine, expand_with_distractors, make_negative_goals, TfIdf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GoalLabel {
    ValidGoal,
    InvalidGoal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    /// Gold premises only (2 to 15).
    Task1,
    /// Exactly 25 premises including distractors.
    Task2,
}

/// An authored proof tree; leaves index into the example's premises.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TreeNode {
    Leaf(usize),
    Inner { conclusion: String, children: Vec<TreeNode> },
}

impl TreeNode {
    /// Premise indices in left-to-right order (a premise may repeat).
    pub fn leaves(&self) -> Vec<usize> {
        let mut out = Vec::new();
        self.collect_leaves(&mut out);
        out
    }

    fn collect_leaves(&self, out: &mut Vec<usize>) {
        match self {
            TreeNode::Leaf(i) => out.push(*i),
            TreeNode::Inner { children, .. } => children.iter().for_each(|c| c.collect_leaves(out)),
        }
    }

    pub fn internal_nodes(&self) -> usize {
        match self {
            TreeNode::Leaf(_) => 0,
            TreeNode::Inner { children, .. } => 1 + children.iter().map(TreeNode::internal_nodes).sum::<usize>(),
        }
    }

    pub fn conclusion(&self) -> Option<&str> {
        match self {
            TreeNode::Leaf(_) => None,
            TreeNode::Inner { conclusion, .. } => Some(conclusion),
        }
    }

    fn map_leaves(&self, f: &impl Fn(usize) -> usize) -> TreeNode {
        match self {
            TreeNode::Leaf(i) => TreeNode::Leaf(f(*i)),
            TreeNode::Inner { conclusion, children } => TreeNode::Inner {
                conclusion: conclusion.clone(),
                children: children.iter().map(|c| c.map_leaves(f)).collect(),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Example {
    pub id: String,
    pub premises: Vec<String>,
    pub goal: String,
    pub label: GoalLabel,
    /// `None` for examples outside the two benchmark settings.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub task: Option<Task>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold_tree: Option<TreeNode>,
}

impl Example {
    pub fn validate(&self) -> Result<(), Error> {
        Goal::new(self.goal.as_str())?;
        let n = self.premises.len();
        match self.task {
            Some(Task::Task1) if !(2..=15).contains(&n) => {
                return Err(Error::Config(format!("{}: task1 needs 2..=15 premises, got {n}", self.id)))
            }
            Some(Task::Task2) if n != 25 => {
                return Err(Error::Config(format!("{}: task2 needs 25 premises, got {n}", self.id)))
            }
            None if n < 2 => return Err(Error::Config(format!("{}: fewer than 2 premises", self.id))),
            _ => {}
        }
        if let Some(tree) = &self.gold_tree {
            if let Some(bad) = tree.leaves().into_iter().find(|&i| i >= n) {
                return Err(Error::Structure(format!("{}: leaf {bad} out of range", self.id)));
            }
        }
        Ok(())
    }

    pub fn premise_statements(&self) -> Vec<Statement> {
        premises_from_texts(&self.premises)
    }

    pub fn goal(&self) -> Result<Goal, Error> {
        Goal::new(self.goal.as_str())
    }

    /// Concatenated premises and goal; the document used for TF-IDF.
    pub fn full_text(&self) -> String {
        let mut s = self.premises.join(" ");
        s.push(' ');
        s.push_str(&self.goal);
        s
    }

    /// Binarized gold proof, if the example carries a tree.
    pub fn gold_proof(&self) -> Option<Result<GoldProof, Error>> {
        let tree = self.gold_tree.as_ref()?;
        Some(binarize_tree(tree).map(|tree| GoldProof {
            premises: self.premises.clone(),
            goal: self.goal.clone(),
            tree,
        }))
    }

    /// Reorders premises by `order` (new position -> old index), remapping
    /// the gold tree accordingly.
    pub fn permute_premises(&mut self, order: &[usize]) {
        let mut new_index = alloc::vec![0; order.len()];
        for (new, &old) in order.iter().enumerate() {
            new_index[old] = new;
        }
        self.premises = order.iter().map(|&i| self.premises[i].clone()).collect();
        if let Some(tree) = &self.gold_tree {
            self.gold_tree = Some(tree.map_leaves(&|i| new_index[i]));
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeRef {
    Premise(usize),
    /// Index into [`BinaryTree::steps`].
    Step(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinaryStep {
    pub inputs: [NodeRef; 2],
    pub conclusion: String,
}

/// Binary proof in topological order; the last step is the root.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinaryTree {
    pub steps: Vec<BinaryStep>,
}

impl BinaryTree {
    pub fn root_conclusion(&self) -> Option<&str> {
        self.steps.last().map(|s| s.conclusion.as_str())
    }

    pub fn leaves(&self) -> Vec<usize> {
        let mut out = Vec::new();
        if !self.steps.is_empty() {
            self.collect(NodeRef::Step(self.steps.len() - 1), &mut out);
        }
        out
    }

    fn collect(&self, node: NodeRef, out: &mut Vec<usize>) {
        match node {
            NodeRef::Premise(i) => out.push(i),
            NodeRef::Step(s) => self.steps[s].inputs.iter().for_each(|&n| self.collect(n, out)),
        }
    }

    /// Steps in the subtree rooted at `step`, including it.
    pub fn subtree(&self, step: usize) -> Vec<NodeRef> {
        let mut out = Vec::new();
        let mut stack = alloc::vec![NodeRef::Step(step)];
        while let Some(n) = stack.pop() {
            out.push(n);
            if let NodeRef::Step(s) = n {
                stack.extend(self.steps[s].inputs);
            }
        }
        out
    }

    pub fn to_tree(&self) -> Option<TreeNode> {
        fn build(t: &BinaryTree, n: NodeRef) -> TreeNode {
            match n {
                NodeRef::Premise(i) => TreeNode::Leaf(i),
                NodeRef::Step(s) => TreeNode::Inner {
                    conclusion: t.steps[s].conclusion.clone(),
                    children: t.steps[s].inputs.iter().map(|&c| build(t, c)).collect(),
                },
            }
        }
        (!self.steps.is_empty()).then(|| build(self, NodeRef::Step(self.steps.len() - 1)))
    }
}

/// Rewrites each k-ary node as a left-leaning chain of k−1 binary steps;
/// intermediate conclusions reuse the parent's text.
pub fn binarize_tree(gold: &TreeNode) -> Result<BinaryTree, Error> {
    fn go(node: &TreeNode, steps: &mut Vec<BinaryStep>) -> Result<NodeRef, Error> {
        match node {
            TreeNode::Leaf(i) => Ok(NodeRef::Premise(*i)),
            TreeNode::Inner { conclusion, children } => {
                if children.len() < 2 {
                    return Err(Error::Structure(format!(
                        "node {conclusion:?} has {} child(ren), need at least 2",
                        children.len()
                    )));
                }
                let refs = children.iter().map(|c| go(c, steps)).collect::<Result<Vec<_>, _>>()?;
                let mut acc = refs[0];
                for &next in &refs[1..] {
                    steps.push(BinaryStep { inputs: [acc, next], conclusion: conclusion.clone() });
                    acc = NodeRef::Step(steps.len() - 1);
                }
                Ok(acc)
            }
        }
    }
    if matches!(gold, TreeNode::Leaf(_)) {
        return Err(Error::Structure("tree root is a premise".to_string()));
    }
    let mut steps = Vec::new();
    go(gold, &mut steps)?;
    Ok(BinaryTree { steps })
}

/// A binarized gold proof with the texts it refers to.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldProof {
    pub premises: Vec<String>,
    pub goal: String,
    pub tree: BinaryTree,
}

impl GoldProof {
    pub fn text(&self, node: NodeRef) -> &str {
        match node {
            NodeRef::Premise(i) => &self.premises[i],
            NodeRef::Step(s) => &self.tree.steps[s].conclusion,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepExample {
    pub input_1: String,
    pub input_2: String,
    pub conclusion: String,
}

/// One step-model training example per binary step.
pub fn extract_step_examples(proofs: &[GoldProof]) -> Vec<StepExample> {
    proofs
        .iter()
        .flat_map(|p| {
            p.tree.steps.iter().map(move |s| StepExample {
                input_1: p.text(s.inputs[0]).to_string(),
                input_2: p.text(s.inputs[1]).to_string(),
                conclusion: s.conclusion.clone(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairLabel {
    Positive,
    Negative,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeuristicExample {
    pub input_1: String,
    pub input_2: String,
    #[serde(default)]
    pub goal: Option<String>,
    pub label: PairLabel,
}

/// Gold step inputs as positives, each paired with a negative in which one
/// input is replaced by a random statement from outside the step's subtree.
pub fn build_heuristic_examples(
    proofs: &[GoldProof],
    with_goal: bool,
    rng_seed: u64,
) -> Result<Vec<HeuristicExample>, Error> {
    let mut pool: Vec<&str> = Vec::new();
    let mut seen = BTreeSet::new();
    for p in proofs {
        let texts = p.premises.iter().map(String::as_str).chain(p.tree.steps.iter().map(|s| s.conclusion.as_str()));
        for t in texts {
            if seen.insert(normalize(t)) {
                pool.push(t);
            }
        }
    }

    let mut rng = rng::seeded(rng_seed);
    let mut out = Vec::new();
    for p in proofs {
        let goal = with_goal.then(|| p.goal.clone());
        for (i, step) in p.tree.steps.iter().enumerate() {
            let inside: BTreeSet<String> = p.tree.subtree(i).into_iter().map(|n| normalize(p.text(n))).collect();
            let eligible: Vec<&str> = pool.iter().copied().filter(|t| !inside.contains(&normalize(t))).collect();
            let replacement = *eligible.choose(&mut rng).ok_or_else(|| {
                Error::Sampling(format!("no statement outside the subtree of {:?}", step.conclusion))
            })?;
            let (a, b) = (p.text(step.inputs[0]).to_string(), p.text(step.inputs[1]).to_string());
            let (na, nb) = if rng.random_bool(0.5) {
                (replacement.to_string(), b.clone())
            } else {
                (a.clone(), replacement.to_string())
            };
            out.push(HeuristicExample { input_1: a, input_2: b, goal: goal.clone(), label: PairLabel::Positive });
            out.push(HeuristicExample { input_1: na, input_2: nb, goal: goal.clone(), label: PairLabel::Negative });
        }
    }
    Ok(out)
}

/// Binary entropy in nats; 0 at the endpoints.
pub fn binary_entropy(p: f64) -> f64 {
    let term = |q: f64| if q <= 0.0 { 0.0 } else { -q * libm::log(q) };
    term(p) + term(1.0 - p)
}

/// The `k` items with the highest prediction entropy, returned in input
/// order. Equal entropies are resolved in favour of earlier items.
pub fn select_active_examples<T: Clone>(scored: &[(T, f64)], k: usize) -> Result<Vec<T>, Error> {
    if k > scored.len() {
        return Err(Error::Config(format!("asked for {k} items out of {}", scored.len())));
    }
    if let Some((_, p)) = scored.iter().find(|(_, p)| !(0.0..=1.0).contains(p)) {
        return Err(Error::Config(format!("probability {p} outside [0, 1]")));
    }
    let mut order: Vec<usize> = (0..scored.len()).collect();
    order.sort_by(|&i, &j| binary_entropy(scored[j].1).total_cmp(&binary_entropy(scored[i].1)).then(i.cmp(&j)));
    let mut picked: Vec<usize> = order.into_iter().take(k).collect();
    picked.sort_unstable();
    Ok(picked.into_iter().map(|i| scored[i].0.clone()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    fn inner(c: &str, children: Vec<TreeNode>) -> TreeNode {
        TreeNode::Inner { conclusion: c.to_string(), children }
    }

    use TreeNode::Leaf;

    #[test]
    fn ternary_node_becomes_chain() {
        let t = inner("r", vec![Leaf(0), Leaf(1), Leaf(2)]);
        let b = binarize_tree(&t).unwrap();
        assert_eq!(
            b.steps,
            vec![
                BinaryStep { inputs: [NodeRef::Premise(0), NodeRef::Premise(1)], conclusion: "r".into() },
                BinaryStep { inputs: [NodeRef::Step(0), NodeRef::Premise(2)], conclusion: "r".into() },
            ]
        );
    }

    #[test]
    fn binary_tree_is_fixpoint() {
        let t = inner("g", vec![inner("i1", vec![Leaf(0), Leaf(1)]), Leaf(2)]);
        assert_eq!(binarize_tree(&t).unwrap().to_tree().unwrap(), t);
    }

    #[test]
    fn unary_node_rejected() {
        let t = inner("g", vec![inner("i", vec![Leaf(0)]), Leaf(1)]);
        assert!(matches!(binarize_tree(&t), Err(Error::Structure(_))));
        assert!(matches!(binarize_tree(&Leaf(0)), Err(Error::Structure(_))));
    }

    fn proof(tree: TreeNode, premises: &[&str], goal: &str) -> GoldProof {
        GoldProof {
            premises: premises.iter().map(|s| s.to_string()).collect(),
            goal: goal.to_string(),
            tree: binarize_tree(&tree).unwrap(),
        }
    }

    #[test]
    fn step_examples_one_per_internal_node() {
        let p = proof(inner("g", vec![inner("i1", vec![Leaf(0), Leaf(1)]), Leaf(2)]), &["a", "b", "c"], "g");
        let steps = extract_step_examples(&[p]);
        assert_eq!(steps.len(), 2);
        assert_eq!(steps[1], StepExample { input_1: "i1".into(), input_2: "c".into(), conclusion: "g".into() });
        assert!(extract_step_examples(&[]).is_empty());
    }

    fn corpus_proofs() -> Vec<GoldProof> {
        // five two-step proofs over disjoint vocabularies
        (0..5)
            .map(|k| {
                let p: Vec<String> = (0..3).map(|j| alloc::format!("fact {k} {j}")).collect();
                let refs: Vec<&str> = p.iter().map(String::as_str).collect();
                let mid = alloc::format!("mid {k}");
                let goal = alloc::format!("goal {k}");
                proof(inner(&goal, vec![inner(&mid, vec![Leaf(0), Leaf(1)]), Leaf(2)]), &refs, &goal)
            })
            .collect()
    }

    #[test]
    fn heuristic_examples_are_balanced_and_outside_subtree() {
        let proofs = corpus_proofs();
        let out = build_heuristic_examples(&proofs, true, 11).unwrap();
        assert_eq!(out.len(), 20);
        let mut it = out.chunks(2);
        for p in &proofs {
            for (i, _) in p.tree.steps.iter().enumerate() {
                let pair = it.next().unwrap();
                let (pos, neg) = (&pair[0], &pair[1]);
                assert_eq!(pos.label, PairLabel::Positive);
                assert_eq!(neg.label, PairLabel::Negative);
                assert_eq!(pos.goal.as_deref(), Some(p.goal.as_str()));
                let inside: BTreeSet<&str> = p.tree.subtree(i).into_iter().map(|n| p.text(n)).collect();
                let replaced = if neg.input_1 != pos.input_1 { &neg.input_1 } else { &neg.input_2 };
                assert!((neg.input_1 == pos.input_1) ^ (neg.input_2 == pos.input_2));
                assert!(!inside.contains(replaced.as_str()));
            }
        }
        assert_eq!(out, build_heuristic_examples(&proofs, true, 11).unwrap());
        assert!(build_heuristic_examples(&proofs, false, 11).unwrap().iter().all(|e| e.goal.is_none()));
    }

    #[test]
    fn heuristic_sampling_error_when_pool_exhausted() {
        let p = proof(inner("g", vec![Leaf(0), Leaf(1)]), &["a", "b"], "g");
        assert!(matches!(build_heuristic_examples(&[p], false, 0), Err(Error::Sampling(_))));
    }

    #[test]
    fn active_selection() {
        let scored = [("a", 0.5), ("b", 0.99), ("c", 0.01)];
        assert_eq!(select_active_examples(&scored, 1).unwrap(), vec!["a"]);
        assert_eq!(select_active_examples(&[("x", 0.9), ("y", 0.1)], 2).unwrap(), vec!["x", "y"]);
        assert!(select_active_examples(&scored, 4).is_err());
    }

    #[test]
    fn active_selection_matches_hand_entropies() {
        // H(p) = -p ln p - (1-p) ln(1-p), evaluated independently:
        // 0.3 -> 0.6108643020548935, 0.95 -> 0.19851524334587267,
        // 0.6 -> 0.6730116670092565, 0.05 -> 0.1985152433458726, 0.45 -> 0.6881388137135884
        let probs = [0.3, 0.95, 0.6, 0.05, 0.45];
        let expected = [0.6108643020548935, 0.19851524334587267, 0.6730116670092565, 0.1985152433458726, 0.6881388137135884];
        for (p, h) in probs.iter().zip(expected) {
            assert!((binary_entropy(*p) - h).abs() < 1e-12);
        }
        let scored: Vec<(usize, f64)> = probs.iter().copied().enumerate().collect();
        // top 3 by entropy: 0.45, 0.6, 0.3 -> input order 0, 2, 4
        assert_eq!(select_active_examples(&scored, 3).unwrap(), vec![0, 2, 4]);
        assert_eq!(binary_entropy(0.0), 0.0);
        assert_eq!(binary_entropy(1.0), 0.0);
    }

    #[test]
    fn permute_remaps_tree() {
        let mut e = Example {
            id: "e".into(),
            premises: vec!["a".into(), "b".into(), "c".into()],
            goal: "g".into(),
            label: GoalLabel::ValidGoal,
            task: None,
            gold_tree: Some(inner("g", vec![Leaf(0), Leaf(2)])),
        };
        e.permute_premises(&[2, 0, 1]);
        assert_eq!(e.premises, vec!["c", "a", "b"]);
        assert_eq!(e.gold_tree.unwrap().leaves(), vec![1, 0]);
    }

    #[test]
    fn task_size_validation() {
        let mut e = Example {
            id: "e".into(),
            premises: vec!["a".into()],
            goal: "g".into(),
            label: GoalLabel::ValidGoal,
            task: Some(Task::Task1),
            gold_tree: None,
        };
        assert!(e.validate().is_err());
        e.premises.push("b".into());
        assert!(e.validate().is_ok());
        e.task = Some(Task::Task2);
        assert!(e.validate().is_err());
    }

    pub(crate) fn arb_nary_tree() -> impl Strategy<Value = TreeNode> {
        let leaf = (0usize..30).prop_map(TreeNode::Leaf);
        leaf.prop_recursive(4, 40, 4, |inner_strategy| {
            (prop::collection::vec(inner_strategy, 2..5), "[a-z]{1,6}( [a-z]{1,6}){0,3}")
                .prop_map(|(children, conclusion)| TreeNode::Inner { conclusion, children })
        })
        .prop_filter("root must be internal", |t| matches!(t, TreeNode::Inner { .. }))
    }

    proptest! {
        #[test]
        fn binarize_preserves_leaves_and_root(t in arb_nary_tree()) {
            let b = binarize_tree(&t).unwrap();
            prop_assert_eq!(b.leaves(), t.leaves());
            prop_assert_eq!(b.root_conclusion(), t.conclusion());
            let k: usize = {
                fn arity_sum(t: &TreeNode) -> usize {
                    match t {
                        TreeNode::Leaf(_) => 0,
                        TreeNode::Inner { children, .. } => children.len() - 1 + children.iter().map(arity_sum).sum::<usize>(),
                    }
                }
                arity_sum(&t)
            };
            prop_assert_eq!(b.steps.len(), k);
        }
    }
}
