use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;

use super::{Example, GoalLabel, Task};
use crate::error::Error;
use crate::rng;
use crate::text::{content_words, normalize};

pub type SparseVector = BTreeMap<String, f64>;

/// Smoothed TF-IDF: `idf(t) = ln((1 + N) / (1 + df(t))) + 1`, raw term
/// counts, L2-normalized vectors over content tokens.
#[derive(Debug, Clone, Default)]
pub struct TfIdf {
    n_docs: usize,
    df: BTreeMap<String, usize>,
}

impl TfIdf {
    pub fn fit<'a, I: IntoIterator<Item = &'a str>>(docs: I) -> Self {
        let mut df = BTreeMap::new();
        let mut n_docs = 0;
        for doc in docs {
            n_docs += 1;
            let unique: BTreeSet<String> = content_words(doc).into_iter().collect();
            for t in unique {
                *df.entry(t).or_insert(0) += 1;
            }
        }
        Self { n_docs, df }
    }

    pub fn idf(&self, term: &str) -> f64 {
        let df = self.df.get(term).copied().unwrap_or(0);
        libm::log((1.0 + self.n_docs as f64) / (1.0 + df as f64)) + 1.0
    }

    pub fn vector(&self, text: &str) -> SparseVector {
        let mut v = SparseVector::new();
        for t in content_words(text) {
            *v.entry(t).or_insert(0.0) += 1.0;
        }
        for (t, w) in v.iter_mut() {
            *w *= self.idf(t);
        }
        let norm = libm::sqrt(v.values().map(|w| w * w).sum::<f64>());
        if norm > 0.0 {
            v.values_mut().for_each(|w| *w /= norm);
        }
        v
    }
}

/// Dot product of two L2-normalized sparse vectors.
pub fn cosine(a: &SparseVector, b: &SparseVector) -> f64 {
    let (small, large) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    small.iter().filter_map(|(t, w)| large.get(t).map(|u| w * u)).sum()
}

fn premise_set(e: &Example) -> BTreeSet<String> {
    e.premises.iter().map(|p| normalize(p)).collect()
}

/// For every valid-goal example, a hard negative carrying the goal of the
/// most TF-IDF-similar other example. Candidates whose premises are a subset
/// of the destination's premises, or whose goal equals the destination goal,
/// are skipped. Equal similarities resolve to the lexicographically smallest
/// goal, then id, so the choice does not depend on corpus order. Examples
/// with no eligible candidate produce no negative.
pub fn make_negative_goals(examples: &[Example]) -> Result<Vec<Example>, Error> {
    if examples.len() < 2 {
        return Err(Error::Config(format!("need at least 2 examples, got {}", examples.len())));
    }
    let texts: Vec<String> = examples.iter().map(Example::full_text).collect();
    let model = TfIdf::fit(texts.iter().map(String::as_str));
    let vectors: Vec<SparseVector> = texts.iter().map(|t| model.vector(t)).collect();
    let premises: Vec<BTreeSet<String>> = examples.iter().map(premise_set).collect();
    let goals: Vec<String> = examples.iter().map(|e| normalize(&e.goal)).collect();

    let mut out = Vec::new();
    for (i, dest) in examples.iter().enumerate() {
        if dest.label != GoalLabel::ValidGoal {
            continue;
        }
        let best = examples
            .iter()
            .enumerate()
            .filter(|&(j, src)| {
                j != i
                    && src.label == GoalLabel::ValidGoal
                    && goals[j] != goals[i]
                    && !premises[j].is_subset(&premises[i])
            })
            .map(|(j, _)| (cosine(&vectors[i], &vectors[j]), j))
            .max_by(|(sa, ja), (sb, jb)| {
                sa.total_cmp(sb)
                    .then_with(|| examples[*jb].goal.cmp(&examples[*ja].goal))
                    .then_with(|| examples[*jb].id.cmp(&examples[*ja].id))
            });
        if let Some((_, j)) = best {
            out.push(Example {
                id: format!("{}-neg", dest.id),
                goal: examples[j].goal.clone(),
                label: GoalLabel::InvalidGoal,
                gold_tree: None,
                ..dest.clone()
            });
        }
    }
    Ok(out)
}

/// Pads `example` to `k` premises with the corpus statements most similar
/// to it, then shuffles premises under `rng_seed` (gold tree remapped).
/// Ties in similarity are broken by a seeded permutation of the corpus.
pub fn expand_with_distractors(example: &Example, corpus: &[String], k: usize, rng_seed: u64) -> Result<Example, Error> {
    let have = example.premises.len();
    if k < have {
        return Err(Error::Config(format!("example already has {have} premises, more than k = {k}")));
    }
    if k == have {
        return Ok(example.clone());
    }
    let needed = k - have;
    let mut present = premise_set(example);
    present.insert(normalize(&example.goal));
    let mut eligible: Vec<&String> = Vec::new();
    for s in corpus {
        if present.insert(normalize(s)) {
            eligible.push(s);
        }
    }
    if eligible.len() < needed {
        return Err(Error::Config(format!(
            "corpus offers {} new statements, {needed} needed",
            eligible.len()
        )));
    }

    let query = example.full_text();
    let model = TfIdf::fit(eligible.iter().map(|s| s.as_str()).chain([query.as_str()]));
    let qv = model.vector(&query);
    let mut rng = rng::seeded(rng_seed);
    let mut rank: Vec<usize> = (0..eligible.len()).collect();
    rank.shuffle(&mut rng);
    let mut scored: Vec<(f64, usize, &String)> =
        eligible.iter().enumerate().map(|(i, s)| (cosine(&qv, &model.vector(s)), rank[i], *s)).collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));

    let mut out = example.clone();
    out.premises.extend(scored.into_iter().take(needed).map(|(_, _, s)| s.clone()));
    let mut order: Vec<usize> = (0..k).collect();
    order.shuffle(&mut rng);
    out.permute_premises(&order);
    if k == 25 {
        out.task = Some(Task::Task2);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use alloc::vec;
    use alloc::vec::Vec;

    fn ex(id: &str, premises: &[&str], goal: &str) -> Example {
        Example {
            id: id.to_string(),
            premises: premises.iter().map(|s| s.to_string()).collect(),
            goal: goal.to_string(),
            label: GoalLabel::ValidGoal,
            task: None,
            gold_tree: None,
        }
    }

    #[test]
    fn two_examples_swap_goals() {
        let e = [ex("a", &["x1", "x2"], "gx"), ex("b", &["y1", "y2"], "gy")];
        let neg = make_negative_goals(&e).unwrap();
        assert_eq!(neg.len(), 2);
        assert_eq!(neg[0].goal, "gy");
        assert_eq!(neg[1].goal, "gx");
        assert!(neg.iter().all(|n| n.label == GoalLabel::InvalidGoal));
        assert!(make_negative_goals(&e[..1]).is_err());
    }

    /// Fixture values below were produced by an independent script applying
    /// the smoothed-idf formula by hand over the content tokens
    /// (stopwords "on" and "are" removed).
    fn fixture() -> Vec<Example> {
        vec![
            ex("e1", &["red apples grow on trees", "apples fall down"], "red apples fall"),
            ex("e2", &["green apples grow on vines", "pears fall down"], "green pears fall"),
            ex("e3", &["blue cars drive fast", "roads are long"], "cars drive on roads"),
        ]
    }

    #[test]
    fn tfidf_fixture_matches_hand_computation() {
        let examples = fixture();
        let texts: Vec<String> = examples.iter().map(Example::full_text).collect();
        let model = TfIdf::fit(texts.iter().map(String::as_str));
        let v: Vec<SparseVector> = texts.iter().map(|t| model.vector(t)).collect();
        assert!((model.idf("apples") - 1.2876820724517808).abs() < 1e-12);
        assert!((model.idf("cars") - 1.6931471805599454).abs() < 1e-12);
        assert!((cosine(&v[0], &v[1]) - 0.389677871558452).abs() < 1e-12);
        assert!((cosine(&v[0], &v[2]) - 0.0).abs() < 1e-12);
        assert!((cosine(&v[1], &v[2]) - 0.0).abs() < 1e-12);

        let neg = make_negative_goals(&examples).unwrap();
        assert_eq!(neg[0].goal, "green pears fall");
        assert_eq!(neg[1].goal, "red apples fall");
        // e3 shares nothing; tie between e1 and e2 resolves to the smaller goal
        assert_eq!(neg[2].goal, "green pears fall");
    }

    #[test]
    fn subset_premise_candidates_are_skipped() {
        let mut examples = fixture();
        // most similar to e1, but its premises are a subset of e1's
        examples.push(ex("e4", &["red apples grow on trees"], "red apples grow"));
        let neg = make_negative_goals(&examples).unwrap();
        assert_eq!(neg[0].id, "e1-neg");
        assert_eq!(neg[0].goal, "green pears fall");
        // e4 itself may take e1's goal: e1's premises are not a subset of e4's
        assert_eq!(neg[3].goal, "red apples fall");
    }

    #[test]
    fn selection_is_permutation_invariant() {
        let examples = fixture();
        let mut reversed = examples.clone();
        reversed.reverse();
        let mut a = make_negative_goals(&examples).unwrap();
        let mut b = make_negative_goals(&reversed).unwrap();
        a.sort_by(|x, y| x.id.cmp(&y.id));
        b.sort_by(|x, y| x.id.cmp(&y.id));
        assert_eq!(a, b);
    }

    fn corpus(n: usize) -> Vec<String> {
        (0..n).map(|i| alloc::format!("distractor number {i} mentions item{}", i % 7)).collect()
    }

    #[test]
    fn expands_to_k() {
        let premises: Vec<String> = (0..10).map(|i| alloc::format!("gold {i}")).collect();
        let refs: Vec<&str> = premises.iter().map(String::as_str).collect();
        let e = ex("e", &refs, "gold goal");
        let out = expand_with_distractors(&e, &corpus(40), 25, 3).unwrap();
        assert_eq!(out.premises.len(), 25);
        assert_eq!(out.task, Some(Task::Task2));
        let set: BTreeSet<String> = out.premises.iter().map(|p| normalize(p)).collect();
        assert_eq!(set.len(), 25);
        assert!(premises.iter().all(|p| out.premises.contains(p)));
        assert_eq!(out, expand_with_distractors(&e, &corpus(40), 25, 3).unwrap());
    }

    #[test]
    fn gold_premises_never_duplicated() {
        let e = ex("e", &["apples fall", "pears fall"], "fruit falls");
        let mut c = corpus(30);
        c.push("Apples fall.".to_string());
        c.push("fruit falls".to_string());
        let out = expand_with_distractors(&e, &c, 25, 0).unwrap();
        assert_eq!(out.premises.iter().filter(|p| normalize(p) == "apples fall").count(), 1);
        assert!(!out.premises.iter().any(|p| normalize(p) == "fruit falls"));
    }

    #[test]
    fn k_equal_to_size_is_noop_and_small_corpus_errors() {
        let e = ex("e", &["a b", "c d"], "g");
        assert_eq!(expand_with_distractors(&e, &[], 2, 0).unwrap(), e);
        assert!(matches!(expand_with_distractors(&e, &corpus(3), 25, 0), Err(Error::Config(_))));
    }

    #[test]
    fn expansion_prefers_similar_statements() {
        let e = ex("e", &["zebras run", "zebras eat grass"], "zebras graze");
        let c: Vec<String> = ["lions hunt zebras", "cars drive", "boats float", "grass grows"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let out = expand_with_distractors(&e, &c, 4, 9).unwrap();
        assert!(out.premises.iter().any(|p| p == "lions hunt zebras"));
        assert!(out.premises.iter().any(|p| p == "grass grows"));
    }
}
