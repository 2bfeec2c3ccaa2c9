//! Deterministic symbolic stand-in for the neural model roles.
//!
//! Statements are rendered from three fact schemas:
//!
//! | fact         | text                      |
//! |--------------|---------------------------|
//! | `Isa(a, b)`  | `a are b`                 |
//! | `Has(c, p)`  | `c have p`                |
//! | `Syn(t, u)`  | `t is also called u`      |
//!
//! Terms are single lowercase words, so rendering is injective and [`parse`]
//! inverts it on normalized text. Three rules compose facts pairwise:
//! transitivity of `Isa`, inheritance of `Has` down `Isa`, and renaming of a
//! term through `Syn`. [`closure`] saturates a fact set under the rules and
//! serves as the brute-force oracle for search correctness.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::backend::{BackendError, EntailmentBackend, PairScoreBackend, StepBackend};
use crate::dataset::{expand_with_distractors, Example, GoalLabel, Task, TreeNode};
use crate::error::Error;
use crate::rng;
use crate::text::{normalize, words};
use crate::types::{Goal, Statement};

const KEYWORDS: [&str; 5] = ["are", "have", "is", "also", "called"];

/// A single lowercase word that is not one of the template keywords.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Term(String);

impl Term {
    pub fn new(word: &str) -> Result<Self, Error> {
        let ok = !word.is_empty()
            && word.chars().all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '-')
            && !KEYWORDS.contains(&word);
        if ok {
            Ok(Self(word.to_string()))
        } else {
            Err(Error::Parse(format!("invalid term {word:?}")))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for Term {
    type Error = Error;
    fn try_from(value: String) -> Result<Self, Error> {
        Term::new(&value)
    }
}

impl From<Term> for String {
    fn from(t: Term) -> String {
        t.0
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Fact {
    Isa(Term, Term),
    Has(Term, Term),
    Syn(Term, Term),
}

impl Fact {
    fn args(&self) -> (&Term, &Term) {
        match self {
            Fact::Isa(a, b) | Fact::Has(a, b) | Fact::Syn(a, b) => (a, b),
        }
    }

    pub fn subject(&self) -> &Term {
        self.args().0
    }

    fn with_args(&self, a: Term, b: Term) -> Fact {
        match self {
            Fact::Isa(..) => Fact::Isa(a, b),
            Fact::Has(..) => Fact::Has(a, b),
            Fact::Syn(..) => Fact::Syn(a, b),
        }
    }

    fn is_degenerate(&self) -> bool {
        let (a, b) = self.args();
        a == b
    }

    /// Replaces every occurrence of `from` with `to`; `None` if `from` does
    /// not occur or the result would relate a term to itself.
    pub fn rename(&self, from: &Term, to: &Term) -> Option<Fact> {
        let (a, b) = self.args();
        if a != from && b != from {
            return None;
        }
        let swap = |t: &Term| if t == from { to.clone() } else { t.clone() };
        let out = self.with_args(swap(a), swap(b));
        (!out.is_degenerate()).then_some(out)
    }
}

impl fmt::Display for Fact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Fact::Isa(a, b) => write!(f, "{a} are {b}"),
            Fact::Has(a, b) => write!(f, "{a} have {b}"),
            Fact::Syn(a, b) => write!(f, "{a} is also called {b}"),
        }
    }
}

pub fn render(fact: &Fact) -> String {
    fact.to_string()
}

/// Inverse of [`render`] on normalized text; `None` for anything else.
pub fn parse(text: &str) -> Option<Fact> {
    let norm = normalize(text);
    let parts: Vec<&str> = norm.split(' ').collect();
    let term = |w: &str| Term::new(w).ok();
    match parts.as_slice() {
        [a, "are", b] => Some(Fact::Isa(term(a)?, term(b)?)),
        [a, "have", b] => Some(Fact::Has(term(a)?, term(b)?)),
        [a, "is", "also", "called", b] => Some(Fact::Syn(term(a)?, term(b)?)),
        _ => None,
    }
}

/// Inference rules in ascending priority.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    Renaming,
    Transitivity,
    Inheritance,
}

impl Rule {
    pub const ALL: [Rule; 3] = [Rule::Renaming, Rule::Transitivity, Rule::Inheritance];

    /// Applies the rule with `first` and `second` in that role order.
    pub fn apply(self, first: &Fact, second: &Fact) -> Option<Fact> {
        match (self, first, second) {
            (Rule::Transitivity, Fact::Isa(a, b), Fact::Isa(b2, c)) if b == b2 && a != c => {
                Some(Fact::Isa(a.clone(), c.clone()))
            }
            (Rule::Inheritance, Fact::Isa(a, b), Fact::Has(b2, p)) if b == b2 => {
                Some(Fact::Has(a.clone(), p.clone()))
            }
            (Rule::Renaming, Fact::Syn(from, to), other) if first != second => other.rename(from, to),
            _ => None,
        }
    }
}

/// Every `(rule, consequent)` obtainable from the unordered pair.
pub fn consequents(x: &Fact, y: &Fact) -> Vec<(Rule, Fact)> {
    let mut out = Vec::new();
    for rule in Rule::ALL {
        for (first, second) in [(x, y), (y, x)] {
            if let Some(c) = rule.apply(first, second) {
                if !out.iter().any(|(r, f)| *r == rule && *f == c) {
                    out.push((rule, c));
                }
            }
        }
    }
    out
}

/// The single conclusion the synthetic step model draws for a pair: the
/// consequent of the highest-priority firing rule, `(x, y)` order first.
pub fn fire(x: &Fact, y: &Fact) -> Option<(Rule, Fact)> {
    for rule in Rule::ALL.iter().rev() {
        for (first, second) in [(x, y), (y, x)] {
            if let Some(c) = rule.apply(first, second) {
                return Some((*rule, c));
            }
        }
    }
    None
}

/// Least fixed point of the rules over `premises`.
pub fn closure(premises: &BTreeSet<Fact>, max_size: usize) -> Result<BTreeSet<Fact>, Error> {
    if premises.len() > max_size {
        return Err(Error::SizeExceeded { limit: max_size });
    }
    let mut known: Vec<Fact> = premises.iter().cloned().collect();
    let mut seen: BTreeSet<Fact> = premises.clone();
    let mut next = 0;
    while next < known.len() {
        let fresh = known[next].clone();
        let mut derived = Vec::new();
        for other in &known[..=next] {
            for (_, c) in consequents(&fresh, other) {
                if !seen.contains(&c) {
                    derived.push(c);
                }
            }
        }
        for c in derived {
            if seen.insert(c.clone()) {
                if seen.len() > max_size {
                    return Err(Error::SizeExceeded { limit: max_size });
                }
                known.push(c);
            }
        }
        next += 1;
    }
    Ok(seen)
}

/// Parses every text that is a fact; others are ignored.
pub fn facts_of<S: AsRef<str>>(texts: &[S]) -> BTreeSet<Fact> {
    texts.iter().filter_map(|t| parse(t.as_ref())).collect()
}

/// Symbolic backend for all three model roles.
///
/// Entailment also accepts one renaming step through the configured synonym
/// pairs, which normally come from the `Syn` facts among the premises.
#[derive(Debug, Clone, Default)]
pub struct SyntheticBackend {
    synonyms: BTreeSet<(Term, Term)>,
}

pub const COMPATIBLE_REPEAT_LOGPROB: f64 = -4.605_170_185_988_091; // ln 0.01

impl SyntheticBackend {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_synonyms<I: IntoIterator<Item = (Term, Term)>>(synonyms: I) -> Self {
        Self { synonyms: synonyms.into_iter().collect() }
    }

    /// Backend whose synonym table is the `Syn` facts among `texts`.
    pub fn for_premises<S: AsRef<str>>(texts: &[S]) -> Self {
        Self::with_synonyms(facts_of(texts).into_iter().filter_map(|f| match f {
            Fact::Syn(a, b) => Some((a, b)),
            _ => None,
        }))
    }

    fn fired(x1: &Statement, x2: &Statement) -> Option<(Rule, Fact)> {
        fire(&parse(&x1.text)?, &parse(&x2.text)?)
    }
}

impl StepBackend for SyntheticBackend {
    fn sample_conclusion(&self, x1: &Statement, x2: &Statement, _top_p: f64, _seed: u64) -> Result<String, BackendError> {
        Ok(match Self::fired(x1, x2) {
            Some((_, fact)) => render(&fact),
            None => x1.text.clone(),
        })
    }

    fn repeat_logprob(&self, x1: &Statement, x2: &Statement) -> Result<f64, BackendError> {
        Ok(if Self::fired(x1, x2).is_some() { COMPATIBLE_REPEAT_LOGPROB } else { 0.0 })
    }
}

impl EntailmentBackend for SyntheticBackend {
    fn entail_prob(&self, premise: &Statement, hypothesis: &str) -> Result<f64, BackendError> {
        if premise.normalized == normalize(hypothesis) {
            return Ok(1.0);
        }
        let (Some(p), Some(h)) = (parse(&premise.text), parse(hypothesis)) else {
            return Ok(0.0);
        };
        let renamed = self.synonyms.iter().any(|(from, to)| p.rename(from, to).as_ref() == Some(&h));
        Ok(if renamed { 1.0 } else { 0.0 })
    }
}

impl PairScoreBackend for SyntheticBackend {
    fn pair_score(&self, x1: &Statement, x2: &Statement, goal: Option<&Goal>) -> Result<f64, BackendError> {
        let Some((_, fact)) = Self::fired(x1, x2) else { return Ok(0.0) };
        let bonus = goal.is_some_and(|g| words(g.as_str()).iter().any(|w| w == fact.subject().as_str()));
        Ok(if bonus { 2.0 } else { 1.0 })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorldSpec {
    /// Taxonomy nodes available, gold chain included.
    pub n_entities: usize,
    pub taxonomy_depth: usize,
    pub n_properties: usize,
    pub n_distractors: usize,
    pub rng_seed: u64,
}

impl Default for WorldSpec {
    fn default() -> Self {
        Self { n_entities: 24, taxonomy_depth: 2, n_properties: 8, n_distractors: 0, rng_seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticWorld {
    /// Taxonomy leaves (chain subjects).
    pub entities: Vec<Term>,
    pub categories: Vec<Term>,
    pub properties: Vec<Term>,
    pub facts: Vec<Fact>,
    /// Base facts of the gold derivation, in chain order.
    pub gold: Vec<Fact>,
    pub goal: Fact,
}

impl SyntheticWorld {
    /// Rendered non-gold facts, usable as a distractor corpus.
    pub fn distractor_corpus(&self) -> Vec<String> {
        self.facts.iter().filter(|f| !self.gold.contains(f)).map(render).collect()
    }
}

fn pseudo_word(rng: &mut rng::Rng) -> String {
    const ONSETS: [&str; 16] = ["b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "sh", "tr"];
    const VOWELS: [&str; 6] = ["a", "e", "i", "o", "u", "oo"];
    const CODAS: [&str; 6] = ["", "", "n", "s", "x", "m"];
    let syllables = rng.random_range(2..=3);
    let mut w = String::new();
    for _ in 0..syllables {
        w.push_str(ONSETS.choose(rng).unwrap());
        w.push_str(VOWELS.choose(rng).unwrap());
    }
    w.push_str(CODAS.choose(rng).unwrap());
    w
}

fn fresh_terms(rng: &mut rng::Rng, n: usize, taken: &mut BTreeSet<String>) -> Vec<Term> {
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let w = pseudo_word(rng);
        if taken.insert(w.clone()) {
            out.push(Term::new(&w).expect("pseudo words are valid terms"));
        }
    }
    out
}

/// Generates a world and a gold example whose goal needs exactly
/// `taxonomy_depth` binary steps: `e0 are c1`, …, `c(d-1) are cd`,
/// `cd have p` ⊢ `e0 have p`. Remaining taxonomy nodes form disjoint
/// distractor chains, from which `n_distractors` premises are sampled.
pub fn generate_world(spec: &WorldSpec) -> Result<(SyntheticWorld, Example), Error> {
    let depth = spec.taxonomy_depth;
    if depth < 1 {
        return Err(Error::Spec("taxonomy_depth must be at least 1".to_string()));
    }
    if spec.n_entities < depth + 1 {
        return Err(Error::Spec(format!(
            "depth {depth} needs {} taxonomy nodes, only {} available",
            depth + 1,
            spec.n_entities
        )));
    }
    if spec.n_properties == 0 {
        return Err(Error::Spec("at least one property is required".to_string()));
    }
    let mut rng = rng::seeded(spec.rng_seed);
    let mut taken = BTreeSet::new();
    let nodes = fresh_terms(&mut rng, spec.n_entities, &mut taken);
    let properties = fresh_terms(&mut rng, spec.n_properties, &mut taken);

    let mut entities = Vec::new();
    let mut categories = Vec::new();
    let mut facts = Vec::new();

    let chain = &nodes[..=depth];
    let property = properties[0].clone();
    let mut gold: Vec<Fact> = chain.windows(2).map(|w| Fact::Isa(w[0].clone(), w[1].clone())).collect();
    gold.push(Fact::Has(chain[depth].clone(), property.clone()));
    let goal = Fact::Has(chain[0].clone(), property);
    entities.push(chain[0].clone());
    categories.extend(chain[1..].iter().cloned());
    facts.extend(gold.iter().cloned());

    // distractor chains over the remaining nodes
    let mut rest = &nodes[depth + 1..];
    while rest.len() >= 2 {
        let len = rng.random_range(2..=4usize).min(rest.len());
        let (links, tail) = rest.split_at(len);
        rest = tail;
        entities.push(links[0].clone());
        categories.extend(links[1..].iter().cloned());
        facts.extend(links.windows(2).map(|w| Fact::Isa(w[0].clone(), w[1].clone())));
        let top = links[len - 1].clone();
        facts.push(Fact::Has(top, properties.choose(&mut rng).unwrap().clone()));
        if rng.random_bool(0.5) {
            let node = links.choose(&mut rng).unwrap().clone();
            let has = Fact::Has(node, properties.choose(&mut rng).unwrap().clone());
            if !facts.contains(&has) {
                facts.push(has);
            }
        }
    }

    let pool: Vec<&Fact> = facts.iter().filter(|f| !gold.contains(f)).collect();
    if pool.len() < spec.n_distractors {
        return Err(Error::Spec(format!(
            "{} distractors requested, world only has {}",
            spec.n_distractors,
            pool.len()
        )));
    }
    let distractors: Vec<Fact> = pool.choose_multiple(&mut rng, spec.n_distractors).map(|f| (*f).clone()).collect();

    let mut premises: Vec<Fact> = gold.iter().chain(distractors.iter()).cloned().collect();
    premises.shuffle(&mut rng);
    let index_of = |f: &Fact| premises.iter().position(|p| p == f).expect("gold fact is a premise");

    // left fold along the chain, then inherit the property
    let mut tree = TreeNode::Leaf(index_of(&gold[0]));
    for (i, fact) in gold.iter().enumerate().skip(1) {
        let conclusion = if i < depth {
            Fact::Isa(chain[0].clone(), chain[i + 1].clone())
        } else {
            goal.clone()
        };
        tree = TreeNode::Inner {
            conclusion: render(&conclusion),
            children: vec![tree, TreeNode::Leaf(index_of(fact))],
        };
    }

    let example = Example {
        id: format!("synth-{}", spec.rng_seed),
        premises: premises.iter().map(render).collect(),
        goal: render(&goal),
        label: GoalLabel::ValidGoal,
        task: (spec.n_distractors == 0 && premises.len() <= 15).then_some(Task::Task1),
        gold_tree: Some(tree),
    };
    let world = SyntheticWorld { entities, categories, properties, facts, gold, goal };
    Ok((world, example))
}

/// A copy of `example` whose goal `subject have q` is not derivable from its
/// premises. Properties that occur among the premises are preferred so the
/// negative shares vocabulary with the positive.
pub fn negative_example(world: &SyntheticWorld, example: &Example, rng_seed: u64) -> Result<Example, Error> {
    let premises = facts_of(&example.premises);
    let closed = closure(&premises, CLOSURE_LIMIT)?;
    let subject = world.goal.subject().clone();
    let backend = SyntheticBackend::for_premises(&example.premises);
    let reachable = |goal: &Fact| {
        let text = render(goal);
        closed.iter().any(|f| {
            let s = Statement::premise(0, render(f));
            backend.entail_prob(&s, &text).map(|p| p > 0.0).unwrap_or(true)
        })
    };
    let mentioned: BTreeSet<&Term> = premises
        .iter()
        .filter_map(|f| match f {
            Fact::Has(_, p) => Some(p),
            _ => None,
        })
        .collect();
    let mut candidates: Vec<Fact> = world
        .properties
        .iter()
        .map(|p| Fact::Has(subject.clone(), p.clone()))
        .filter(|g| !reachable(g))
        .collect();
    if candidates.is_empty() {
        return Err(Error::Spec("every property is derivable for the goal subject".to_string()));
    }
    let preferred: Vec<Fact> = candidates
        .iter()
        .filter(|g| matches!(g, Fact::Has(_, p) if mentioned.contains(p)))
        .cloned()
        .collect();
    if !preferred.is_empty() {
        candidates = preferred;
    }
    let mut rng = rng::seeded(rng::mix(rng_seed, 0x006e_6567));
    let goal = candidates.choose(&mut rng).unwrap();
    Ok(Example {
        id: format!("{}-neg", example.id),
        goal: render(goal),
        label: GoalLabel::InvalidGoal,
        gold_tree: None,
        ..example.clone()
    })
}

/// Pads the gold example to `k` premises with TF-IDF-retrieved distractors
/// from the world's non-gold facts.
pub fn task2_example(world: &SyntheticWorld, example: &Example, k: usize, rng_seed: u64) -> Result<Example, Error> {
    let corpus = world.distractor_corpus();
    let mut out = expand_with_distractors(example, &corpus, k, rng_seed)?;
    out.task = (k == 25).then_some(Task::Task2);
    Ok(out)
}

/// Upper bound used for closure checks on generated examples.
pub const CLOSURE_LIMIT: usize = 100_000;

/// Deterministic valid/invalid suite: `n_pairs` worlds, each contributing
/// one valid and one invalid example. Depth cycles through `depths`.
/// With `task2_size` set, premises are expanded to that many via distractor
/// retrieval; otherwise `n_distractors` are sampled while generating.
pub fn suite(
    n_pairs: usize,
    depths: &[usize],
    n_distractors: usize,
    task2_size: Option<usize>,
    rng_seed: u64,
) -> Result<Vec<Example>, Error> {
    if depths.is_empty() {
        return Err(Error::Config("no depths given".to_string()));
    }
    let mut out = Vec::with_capacity(2 * n_pairs);
    for i in 0..n_pairs {
        let depth = depths[i % depths.len()];
        let spec = WorldSpec {
            n_entities: 40.max(depth + 1 + 2 * n_distractors),
            taxonomy_depth: depth,
            n_properties: 8,
            n_distractors: if task2_size.is_some() { 0 } else { n_distractors },
            rng_seed: rng::mix(rng_seed, i as u64),
        };
        let (world, mut example) = generate_world(&spec)?;
        if let Some(k) = task2_size {
            example = task2_example(&world, &example, k, spec.rng_seed)?;
        }
        example.id = format!("synth-{i}");
        let negative = negative_example(&world, &example, spec.rng_seed)?;
        out.push(example);
        out.push(negative);
    }
    Ok(out)
}

/// Goal facts of `examples` grouped by example id, for oracle checks.
pub fn closure_membership(examples: &[Example]) -> Result<BTreeMap<String, bool>, Error> {
    let mut out = BTreeMap::new();
    for e in examples {
        let closed = closure(&facts_of(&e.premises), CLOSURE_LIMIT)?;
        let member = parse(&e.goal).is_some_and(|g| closed.contains(&g));
        out.insert(e.id.clone(), member);
    }
    Ok(out)
}
