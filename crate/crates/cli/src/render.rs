//! Text renderings of search results: an indented ASCII tree and Graphviz DOT.

use std::collections::BTreeMap;
use std::fmt::Write;

use deduce_core::{DeductionStep, ProofResult, ProofStatus, Provenance, Statement, StatementId};

/// `p3` for premise 3, `i2` for the conclusion of step 2.
pub fn node_label(s: &Statement) -> String {
    match s.provenance {
        Provenance::Premise => format!("p{}", s.id.0),
        Provenance::Derived(step) => format!("i{step}"),
    }
}

fn steps_by_conclusion(steps: &[DeductionStep]) -> BTreeMap<StatementId, &DeductionStep> {
    steps.iter().map(|s| (s.conclusion.id, s)).collect()
}

fn status_line(r: &ProofResult) -> String {
    let what = match r.status {
        ProofStatus::Proved => "proved",
        ProofStatus::Exhausted => "fringe exhausted",
        ProofStatus::StepBudgetReached => "step budget reached",
    };
    format!("{what} after {} step(s), {} pop(s)", r.steps_expanded, r.pops)
}

fn ascii_node(r: &ProofResult, by: &BTreeMap<StatementId, &DeductionStep>, id: StatementId, prefix: &str, out: &mut String) {
    let Some(step) = by.get(&id) else { return };
    for (k, child) in step.inputs.iter().enumerate() {
        let last = k == 1;
        let s = r.statement(*child).expect("step inputs are known statements");
        let _ = write!(out, "{prefix}{}[{}] {}", if last { "└── " } else { "├── " }, node_label(s), s.text);
        if let Some(cs) = by.get(child) {
            let _ = write!(out, "  (step {}, entail {:.3})", cs.index, cs.goal_entail_score);
        }
        out.push('\n');
        let deeper = format!("{prefix}{}", if last { "    " } else { "│   " });
        ascii_node(r, by, *child, &deeper, out);
    }
}

/// The proof tree when there is one, otherwise the list of derived steps.
pub fn ascii(r: &ProofResult) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "goal: {}", r.goal);
    let _ = writeln!(out, "status: {}", status_line(r));
    match &r.tree {
        Some(tree) => {
            let by = steps_by_conclusion(&tree.steps);
            let root = r.statement(tree.root).expect("root is a known statement");
            let step = by[&tree.root];
            let _ = writeln!(out, "[{}] {}  (step {}, entail {:.3})", node_label(root), root.text, step.index, step.goal_entail_score);
            ascii_node(r, &by, tree.root, "", &mut out);
        }
        None => {
            if r.forest.is_empty() {
                out.push_str("no steps derived\n");
            }
            for s in &r.forest {
                let name = |id| r.statement(id).map(node_label).unwrap_or_else(|| format!("?{id}"));
                let _ = writeln!(
                    out,
                    "[{}] {} + {} -> {}  (entail {:.3})",
                    node_label(&s.conclusion),
                    name(s.inputs[0]),
                    name(s.inputs[1]),
                    s.conclusion.text,
                    s.goal_entail_score
                );
            }
        }
    }
    out
}

fn dot_escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"").replace('\n', "\\n")
}

/// Graphviz digraph with edges pointing from inputs to conclusions.
pub fn dot(r: &ProofResult) -> String {
    let steps: Vec<&DeductionStep> = match &r.tree {
        Some(t) => t.steps.iter().collect(),
        None => r.forest.iter().collect(),
    };
    let mut leaves: Vec<StatementId> =
        steps.iter().flat_map(|s| s.inputs).filter(|id| r.premises.iter().any(|p| p.id == *id)).collect();
    leaves.sort();
    leaves.dedup();

    let mut out = String::from("digraph proof {\n  rankdir=BT;\n  node [shape=box, fontname=\"Helvetica\"];\n");
    for id in &leaves {
        let s = r.statement(*id).unwrap();
        let _ = writeln!(out, "  {} [label=\"{}\"];", node_label(s), dot_escape(&s.text));
    }
    let root = r.tree.as_ref().map(|t| t.root);
    for s in &steps {
        let c = &s.conclusion;
        let style = if Some(c.id) == root { ", style=bold" } else { "" };
        let _ = writeln!(
            out,
            "  {} [label=\"{}\\nstep {}, entail {:.3}\"{style}];",
            node_label(c),
            dot_escape(&c.text),
            s.index,
            s.goal_entail_score
        );
    }
    for s in &steps {
        for input in s.inputs {
            if let Some(x) = r.statement(input) {
                let _ = writeln!(out, "  {} -> {};", node_label(x), node_label(&s.conclusion));
            }
        }
    }
    out.push_str("}\n");
    out
}
