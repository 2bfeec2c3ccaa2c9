//! Linearized proof strings.
//!
//! Both formats are `;`-separated steps of the form
//! `a & b -> label: text`, with the final step writing only the root keyword
//! (`a & b -> hypot`). The end-to-end format labels premises `s1…` and
//! intermediates `i1…`; EntailmentBank proofs use `sent1…`, `int1…` and
//! `hypothesis`, and may have more than two inputs per step.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::{BinaryStep, BinaryTree, NodeRef, TreeNode};
use crate::error::Error;

const ROOT: &str = "hypot";

struct RawStep<'a> {
    inputs: Vec<&'a str>,
    /// `None` for the root step.
    output: Option<(&'a str, &'a str)>,
}

fn split_steps<'a>(s: &'a str, root_keyword: &str) -> Result<Vec<RawStep<'a>>, Error> {
    let mut out = Vec::new();
    for part in s.split(';').map(str::trim).filter(|p| !p.is_empty()) {
        let (lhs, rhs) = part
            .split_once(" -> ")
            .ok_or_else(|| Error::Parse(format!("step {part:?} has no ' -> '")))?;
        let inputs: Vec<&str> = lhs.split(" & ").map(str::trim).collect();
        let rhs = rhs.trim();
        let output = if rhs == root_keyword {
            None
        } else {
            let (label, text) = rhs
                .split_once(": ")
                .ok_or_else(|| Error::Parse(format!("conclusion {rhs:?} has no label")))?;
            Some((label.trim(), text))
        };
        out.push(RawStep { inputs, output });
    }
    match out.iter().position(|s| s.output.is_none()) {
        Some(i) if i + 1 == out.len() => Ok(out),
        Some(_) => Err(Error::Parse(format!("'{root_keyword}' step is not last"))),
        None => Err(Error::Parse(format!("no '{root_keyword}' step"))),
    }
}

/// End-to-end linearization: `s3 & s7 -> i1: text; i1 & s2 -> hypot`.
/// `premise_labels[i]` is the label of premise `i`.
pub fn linearize_tree(tree: &BinaryTree, premise_labels: &[String]) -> Result<String, Error> {
    if tree.steps.is_empty() {
        return Err(Error::Structure("tree has no steps".to_string()));
    }
    let label = |n: NodeRef| match n {
        NodeRef::Premise(i) => premise_labels
            .get(i)
            .cloned()
            .ok_or_else(|| Error::Label(format!("premise {i} has no label"))),
        NodeRef::Step(s) => Ok(format!("i{}", s + 1)),
    };
    let last = tree.steps.len() - 1;
    let mut parts = Vec::with_capacity(tree.steps.len());
    for (i, step) in tree.steps.iter().enumerate() {
        let lhs = format!("{} & {}", label(step.inputs[0])?, label(step.inputs[1])?);
        if i == last {
            parts.push(format!("{lhs} -> {ROOT}"));
        } else {
            let text = &step.conclusion;
            if text.contains(';') || text.trim() != text || text.is_empty() {
                return Err(Error::Structure(format!("conclusion {text:?} cannot be linearized")));
            }
            parts.push(format!("{lhs} -> i{}: {text}", i + 1));
        }
    }
    Ok(parts.join("; "))
}

/// Inverse of [`linearize_tree`]; the root conclusion is `hypothesis`.
pub fn parse_linearized(s: &str, premise_labels: &[String], hypothesis: &str) -> Result<BinaryTree, Error> {
    let premises: BTreeMap<&str, usize> = premise_labels.iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect();
    let mut intermediates: BTreeMap<&str, usize> = BTreeMap::new();
    let mut steps = Vec::new();
    for raw in split_steps(s, ROOT)? {
        let [a, b] = raw.inputs.as_slice() else {
            return Err(Error::Parse(format!("expected 2 inputs, got {}", raw.inputs.len())));
        };
        let resolve = |l: &str| {
            premises
                .get(l)
                .map(|&i| NodeRef::Premise(i))
                .or_else(|| intermediates.get(l).map(|&s| NodeRef::Step(s)))
                .ok_or_else(|| Error::Label(format!("unknown label {l:?}")))
        };
        let inputs = [resolve(a)?, resolve(b)?];
        let conclusion = match raw.output {
            Some((label, text)) => {
                if intermediates.insert(label, steps.len()).is_some() {
                    return Err(Error::Parse(format!("label {label:?} defined twice")));
                }
                text.to_string()
            }
            None => hypothesis.to_string(),
        };
        steps.push(BinaryStep { inputs, conclusion });
    }
    Ok(BinaryTree { steps })
}

/// Splits an EntailmentBank context (`sent1: … sent2: …`) into premises.
pub fn parse_eb_context(context: &str) -> Result<Vec<String>, Error> {
    let bytes = context.as_bytes();
    let mut marks: Vec<(usize, usize, usize)> = Vec::new(); // (number, label start, text start)
    let mut i = 0;
    while let Some(off) = context[i..].find("sent") {
        let start = i + off;
        let mut j = start + 4;
        while j < bytes.len() && bytes[j].is_ascii_digit() {
            j += 1;
        }
        let boundary = start == 0 || bytes[start - 1] == b' ';
        if boundary && j > start + 4 && context[j..].starts_with(": ") {
            let n: usize = context[start + 4..j].parse().map_err(|_| Error::Parse("bad sentence number".into()))?;
            marks.push((n, start, j + 2));
        }
        i = start + 4;
    }
    if marks.is_empty() {
        return Err(Error::Parse("context has no 'sentN:' markers".into()));
    }
    let mut out: Vec<(usize, String)> = Vec::with_capacity(marks.len());
    for (k, &(n, _, text_start)) in marks.iter().enumerate() {
        let end = marks.get(k + 1).map_or(context.len(), |m| m.1);
        out.push((n, context[text_start..end].trim().to_string()));
    }
    out.sort_by_key(|(n, _)| *n);
    for (k, (n, _)) in out.iter().enumerate() {
        if *n != k + 1 {
            return Err(Error::Parse(format!("sentence numbers are not 1..{}", out.len())));
        }
    }
    Ok(out.into_iter().map(|(_, t)| t).collect())
}

/// Parses an EntailmentBank proof into an n-ary tree over `n_premises`.
pub fn parse_eb_proof(proof: &str, hypothesis: &str, n_premises: usize) -> Result<TreeNode, Error> {
    let mut nodes: BTreeMap<&str, TreeNode> = BTreeMap::new();
    let mut root = None;
    for raw in split_steps(proof, "hypothesis")? {
        let mut children = Vec::with_capacity(raw.inputs.len());
        for l in &raw.inputs {
            let child = if let Some(n) = l.strip_prefix("sent").and_then(|d| d.parse::<usize>().ok()) {
                if n == 0 || n > n_premises {
                    return Err(Error::Label(format!("{l} out of range")));
                }
                TreeNode::Leaf(n - 1)
            } else {
                nodes.get(l).cloned().ok_or_else(|| Error::Label(format!("unknown label {l:?}")))?
            };
            children.push(child);
        }
        match raw.output {
            Some((label, text)) => {
                nodes.insert(label, TreeNode::Inner { conclusion: text.trim().to_string(), children });
            }
            None => root = Some(TreeNode::Inner { conclusion: hypothesis.to_string(), children }),
        }
    }
    root.ok_or_else(|| Error::Parse("no hypothesis step".into()))
}
