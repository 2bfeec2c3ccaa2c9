//! Evaluation measures over search runs and annotation agreement.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::dataset::GoalLabel;
use crate::error::Error;
use crate::types::ProofStatus;

/// Outcome of one search on one example.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub example_id: String,
    pub label: GoalLabel,
    /// Highest gate score over all derived conclusions; 0 when nothing was derived.
    pub best_entail_score: f64,
    pub proved_at_alpha: bool,
    pub steps_to_goal: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub status: Option<ProofStatus>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl RunRecord {
    pub fn new(example_id: impl Into<String>, label: GoalLabel, best_entail_score: f64, alpha: f64, steps_to_goal: Option<u32>) -> Self {
        Self {
            example_id: example_id.into(),
            label,
            best_entail_score,
            proved_at_alpha: best_entail_score >= alpha,
            steps_to_goal,
            seed: None,
            status: None,
            error: None,
        }
    }

    fn is_positive(&self) -> bool {
        self.label == GoalLabel::ValidGoal
    }
}

fn positives(records: &[RunRecord]) -> impl Iterator<Item = &RunRecord> {
    records.iter().filter(|r| r.is_positive())
}

/// Percentage of valid-goal records whose best score reaches `alpha`.
pub fn goal_rate(records: &[RunRecord], alpha: f64) -> Result<f64, Error> {
    let (hit, total) = positives(records).fold((0usize, 0usize), |(h, t), r| (h + (r.best_entail_score >= alpha) as usize, t + 1));
    if total == 0 {
        return Err(Error::Metric("no valid-goal records".to_string()));
    }
    Ok(100.0 * hit as f64 / total as f64)
}

/// Mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> Result<(f64, f64), Error> {
    if values.is_empty() {
        return Err(Error::Metric("mean of an empty list".to_string()));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    Ok((mean, libm::sqrt(var)))
}

/// Mean and population std of `steps_to_goal` over proved valid-goal records.
pub fn steps_stats(records: &[RunRecord]) -> Result<(f64, f64), Error> {
    let steps: Vec<f64> = positives(records)
        .filter(|r| r.proved_at_alpha)
        .filter_map(|r| r.steps_to_goal)
        .map(f64::from)
        .collect();
    if steps.is_empty() {
        return Err(Error::Metric("no proved valid-goal records".to_string()));
    }
    mean_std(&steps)
}

fn check_finite(xs: &[f64], what: &str) -> Result<(), Error> {
    match xs.iter().find(|x| !x.is_finite()) {
        Some(x) => Err(Error::Metric(format!("non-finite {what} score {x}"))),
        None => Ok(()),
    }
}

/// Mann-Whitney AUROC: `(#{p > n} + ½·#{p = n}) / (|pos|·|neg|)`.
pub fn auroc(pos: &[f64], neg: &[f64]) -> Result<f64, Error> {
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::Metric(format!("auroc needs both classes ({} pos, {} neg)", pos.len(), neg.len())));
    }
    check_finite(pos, "positive")?;
    check_finite(neg, "negative")?;
    let mut sorted = neg.to_vec();
    sorted.sort_by(f64::total_cmp);
    // twice the statistic's numerator, kept integral so the only rounding is the final division
    let mut doubled: u64 = 0;
    for &p in pos {
        let below = sorted.partition_point(|&n| n < p) as u64;
        let not_above = sorted.partition_point(|&n| n <= p) as u64;
        doubled += 2 * below + (not_above - below);
    }
    Ok(doubled as f64 / (2 * pos.len() as u64 * neg.len() as u64) as f64)
}

pub fn auroc_of_records(records: &[RunRecord]) -> Result<f64, Error> {
    let (pos, neg): (Vec<&RunRecord>, Vec<&RunRecord>) = records.iter().partition(|r| r.is_positive());
    let score = |v: Vec<&RunRecord>| v.into_iter().map(|r| r.best_entail_score).collect::<Vec<_>>();
    auroc(&score(pos), &score(neg))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub threshold: f64,
    pub precision: f64,
    pub recall: f64,
    pub tpr: f64,
    pub fpr: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PrCurve {
    pub points: Vec<CurvePoint>,
    /// Thresholds at which nothing is predicted positive, so precision is undefined.
    pub omitted: Vec<f64>,
}

/// Precision and recall of "predict valid when best score ≥ threshold", one
/// point per threshold in the given order.
pub fn pr_curve(records: &[RunRecord], thresholds: &[f64]) -> Result<PrCurve, Error> {
    let n_pos = positives(records).count();
    let n_neg = records.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::Metric(format!("pr curve needs both labels ({n_pos} valid, {n_neg} invalid)")));
    }
    let mut curve = PrCurve::default();
    for &t in thresholds {
        let (mut tp, mut fp) = (0usize, 0usize);
        for r in records.iter().filter(|r| r.best_entail_score >= t) {
            if r.is_positive() {
                tp += 1;
            } else {
                fp += 1;
            }
        }
        if tp + fp == 0 {
            curve.omitted.push(t);
            continue;
        }
        let recall = tp as f64 / n_pos as f64;
        curve.points.push(CurvePoint {
            threshold: t,
            precision: tp as f64 / (tp + fp) as f64,
            recall,
            tpr: recall,
            fpr: fp as f64 / n_neg as f64,
        });
    }
    Ok(curve)
}

/// Mean token log-likelihood of a generated sequence.
pub fn intrinsic_confidence(token_logprobs: &[f64]) -> Result<f64, Error> {
    if token_logprobs.is_empty() {
        return Err(Error::Metric("no tokens".to_string()));
    }
    Ok(token_logprobs.iter().sum::<f64>() / token_logprobs.len() as f64)
}

/// Expected share of fully valid trees when each step is independently valid
/// with probability `v`: the mean of `v^|T|`.
pub fn expected_valid_fraction(v: f64, tree_sizes: &[u32]) -> Result<f64, Error> {
    if !(0.0..=1.0).contains(&v) {
        return Err(Error::Metric(format!("step validity {v} outside [0, 1]")));
    }
    if tree_sizes.is_empty() || tree_sizes.contains(&0) {
        return Err(Error::Metric("tree sizes must be a non-empty list of positive integers".to_string()));
    }
    let total: f64 = tree_sizes.iter().map(|&s| libm::pow(v, f64::from(s))).sum();
    Ok(total / tree_sizes.len() as f64)
}

/// Cohen's κ for two binary labelings, with chance agreement from the
/// product of marginals. Perfect agreement on a single class gives 1.
pub fn cohen_kappa(a: &[bool], b: &[bool]) -> Result<f64, Error> {
    if a.len() != b.len() {
        return Err(Error::Metric(format!("label lists differ in length ({} vs {})", a.len(), b.len())));
    }
    if a.is_empty() {
        return Err(Error::Metric("no labels".to_string()));
    }
    // κ = (n·agree − Σ marginal products) / (n² − Σ marginal products), all integers
    let n = a.len() as i64;
    let agree = a.iter().zip(b).filter(|(x, y)| x == y).count() as i64;
    let a1 = a.iter().filter(|&&x| x).count() as i64;
    let b1 = b.iter().filter(|&&x| x).count() as i64;
    let chance = a1 * b1 + (n - a1) * (n - b1);
    if chance == n * n {
        return Ok(1.0);
    }
    Ok((n * agree - chance) as f64 / (n * n - chance) as f64)
}
