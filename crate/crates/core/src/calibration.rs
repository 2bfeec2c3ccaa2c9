//! Choosing and validating the goal-entailment threshold.
//!
//! Labeled (statement, goal) pairs are split into folds that never share a
//! goal between train and test. On each fold the F1-maximizing threshold is
//! picked on the training side and scored on the held-out side; the
//! reported threshold is the median of the fold thresholds.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::rng;

/// Neutral and contradiction both count as not entailed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntailLabel {
    Entailment,
    #[serde(alias = "neutral", alias = "contradiction")]
    NotEntailment,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabeledPair {
    pub statement: String,
    pub goal: String,
    pub goal_id: String,
    pub label: EntailLabel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
}

/// Indices into the pair list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Shuffles the distinct goal ids under `rng_seed` and deals them into `k`
/// groups; fold `i` tests on group `i` and trains on the rest.
pub fn goal_disjoint_folds(pairs: &[LabeledPair], k: usize, rng_seed: u64) -> Result<Vec<Fold>, Error> {
    if k < 2 {
        return Err(Error::Config(format!("need at least 2 folds, got {k}")));
    }
    let mut goals: Vec<&str> = pairs.iter().map(|p| p.goal_id.as_str()).collect::<BTreeSet<_>>().into_iter().collect();
    if goals.len() < k {
        return Err(Error::Config(format!("{} distinct goals cannot fill {k} folds", goals.len())));
    }
    goals.shuffle(&mut rng::seeded(rng_seed));
    let group_of = |goal: &str| goals.iter().position(|g| *g == goal).unwrap() % k;
    let groups: Vec<usize> = pairs.iter().map(|p| group_of(&p.goal_id)).collect();
    Ok((0..k)
        .map(|f| {
            let (test, train) = (0..pairs.len()).partition(|&i| groups[i] == f);
            Fold { train, test }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdMetrics {
    pub alpha: f64,
    pub f1: f64,
    pub precision: f64,
    pub recall: f64,
}

/// Precision/recall/F1 of "entailed when score ≥ alpha". Precision with no
/// predicted positives and F1 with no true positives are 0.
pub fn evaluate_at(scored: &[(f64, bool)], alpha: f64) -> ThresholdMetrics {
    let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
    for &(s, positive) in scored {
        match (s >= alpha, positive) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => {}
        }
    }
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    ThresholdMetrics {
        alpha,
        f1: ratio(2 * tp, 2 * tp + fp + fn_),
        precision: ratio(tp, tp + fp),
        recall: ratio(tp, tp + fn_),
    }
}

/// The grid point with the best F1; among equal F1s the larger threshold.
pub fn select_threshold(scored: &[(f64, bool)], grid: &[f64]) -> Result<ThresholdMetrics, Error> {
    if grid.is_empty() {
        return Err(Error::Config("empty threshold grid".to_string()));
    }
    let positives = scored.iter().filter(|(_, p)| *p).count();
    if positives == 0 || positives == scored.len() {
        return Err(Error::Metric("threshold selection needs both labels".to_string()));
    }
    if let Some((s, _)) = scored.iter().find(|(s, _)| !s.is_finite()) {
        return Err(Error::Metric(format!("non-finite score {s}")));
    }
    let best = grid
        .iter()
        .map(|&a| evaluate_at(scored, a))
        .max_by(|x, y| x.f1.total_cmp(&y.f1).then(x.alpha.total_cmp(&y.alpha)))
        .unwrap();
    Ok(best)
}

/// Every distinct score plus the midpoint between each adjacent pair.
pub fn default_grid(scores: &[f64]) -> Vec<f64> {
    let mut distinct: Vec<f64> = scores.iter().copied().filter(|s| s.is_finite()).collect();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    let mut grid = Vec::with_capacity(distinct.len() * 2);
    for (i, &s) in distinct.iter().enumerate() {
        if i > 0 {
            grid.push((distinct[i - 1] + s) / 2.0);
        }
        grid.push(s);
    }
    grid
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub train_goals: usize,
    pub test_goals: usize,
    pub train: ThresholdMetrics,
    pub test: ThresholdMetrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub folds: Vec<FoldReport>,
    /// Median of the per-fold thresholds.
    pub alpha: f64,
    /// Metrics of `alpha` over all pairs.
    pub overall: ThresholdMetrics,
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let m = xs.len() / 2;
    if xs.len() % 2 == 1 {
        xs[m]
    } else {
        (xs[m - 1] + xs[m]) / 2.0
    }
}

/// Goal-disjoint k-fold threshold selection. Every pair must carry a score.
/// `grid` defaults to [`default_grid`] of each fold's training scores.
pub fn cross_validate(pairs: &[LabeledPair], k: usize, rng_seed: u64, grid: Option<&[f64]>) -> Result<CalibrationReport, Error> {
    let scored: Vec<(f64, bool)> = pairs
        .iter()
        .map(|p| {
            p.score
                .map(|s| (s, p.label == EntailLabel::Entailment))
                .ok_or_else(|| Error::Config(format!("pair for goal {:?} has no score", p.goal_id)))
        })
        .collect::<Result<_, _>>()?;
    let distinct = |idx: &[usize]| idx.iter().map(|&i| pairs[i].goal_id.as_str()).collect::<BTreeSet<_>>().len();
    let mut folds = Vec::with_capacity(k);
    for fold in goal_disjoint_folds(pairs, k, rng_seed)? {
        let train: Vec<(f64, bool)> = fold.train.iter().map(|&i| scored[i]).collect();
        let test: Vec<(f64, bool)> = fold.test.iter().map(|&i| scored[i]).collect();
        let fold_grid = match grid {
            Some(g) => g.to_vec(),
            None => default_grid(&train.iter().map(|s| s.0).collect::<Vec<_>>()),
        };
        let chosen = select_threshold(&train, &fold_grid)?;
        folds.push(FoldReport {
            train_goals: distinct(&fold.train),
            test_goals: distinct(&fold.test),
            train: chosen,
            test: evaluate_at(&test, chosen.alpha),
        });
    }
    let alpha = median(folds.iter().map(|f| f.train.alpha).collect());
    Ok(CalibrationReport { overall: evaluate_at(&scored, alpha), folds, alpha })
}

/// Strict-majority vote over annotator labels (two of three for three annotators).
pub fn majority_label(labels: &[EntailLabel]) -> Result<EntailLabel, Error> {
    if labels.is_empty() {
        return Err(Error::Config("no labels to reduce".to_string()));
    }
    let yes = labels.iter().filter(|&&l| l == EntailLabel::Entailment).count();
    Ok(if 2 * yes > labels.len() { EntailLabel::Entailment } else { EntailLabel::NotEntailment })
}
