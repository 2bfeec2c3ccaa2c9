//! Batch evaluation: many searches, their records, metrics, and a manifest
//! that is enough to reproduce the records exactly.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use deduce_core::calibration::default_grid;
use deduce_core::dataset::{Example, Task};
use deduce_core::metrics::{auroc_of_records, goal_rate, mean_std, pr_curve, steps_stats, CurvePoint, RunRecord};
use deduce_core::synthetic::SyntheticBackend;
use deduce_core::{scsearch_observed, Heuristic, HeuristicKind, ProofResult, ProofStatus, SearchConfig, SearchError, SearchEvent};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::BackendSpec;
use crate::remote::{RemoteBackend, RemoteOptions};

/// The three model roles behind one search.
pub trait ModelSet: Sync {
    fn run(
        &self,
        example: &Example,
        heuristic: HeuristicKind,
        config: &SearchConfig,
        observer: &mut dyn FnMut(SearchEvent<'_>),
    ) -> Result<ProofResult, SearchError>;
}

/// Symbolic backend; synonyms come from each example's own premises.
#[derive(Debug, Clone, Copy, Default)]
pub struct SyntheticModels;

impl ModelSet for SyntheticModels {
    fn run(
        &self,
        example: &Example,
        heuristic: HeuristicKind,
        config: &SearchConfig,
        observer: &mut dyn FnMut(SearchEvent<'_>),
    ) -> Result<ProofResult, SearchError> {
        let backend = SyntheticBackend::for_premises(&example.premises);
        let goal = example.goal().map_err(SearchError::Invalid)?;
        let h = Heuristic::from_kind(heuristic, &backend, &backend);
        scsearch_observed(&example.premise_statements(), &goal, &h, &backend, &backend, config, observer)
    }
}

impl ModelSet for RemoteBackend {
    fn run(
        &self,
        example: &Example,
        heuristic: HeuristicKind,
        config: &SearchConfig,
        observer: &mut dyn FnMut(SearchEvent<'_>),
    ) -> Result<ProofResult, SearchError> {
        let goal = example.goal().map_err(SearchError::Invalid)?;
        let h = Heuristic::from_kind(heuristic, self, self);
        scsearch_observed(&example.premise_statements(), &goal, &h, self, self, config, observer)
    }
}

pub fn models_for(spec: &BackendSpec) -> Box<dyn ModelSet> {
    match spec {
        BackendSpec::Synthetic => Box::new(SyntheticModels),
        BackendSpec::Remote(url) => Box::new(RemoteBackend::new(url, RemoteOptions::default())),
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetRef {
    pub path: PathBuf,
    pub sha256: String,
    pub examples: usize,
}

impl DatasetRef {
    pub fn of(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).with_context(|| format!("reading dataset {}", path.display()))?;
        Ok(Self { path: path.to_path_buf(), sha256: sha256_hex(&bytes), examples: 0 })
    }
}

/// Everything that determines a batch run's records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub search: SearchConfig,
    pub heuristic: HeuristicKind,
    pub backend: BackendSpec,
    pub dataset: DatasetRef,
    #[serde(default)]
    pub task: Option<Task>,
    /// One trial per seed; each trial overrides `search.rng_seed`.
    pub seeds: Vec<u64>,
    pub jobs: usize,
    /// Extra PR-curve thresholds on top of the observed-score grid.
    #[serde(default)]
    pub thresholds: Vec<f64>,
    pub created_unix: u64,
    #[serde(default)]
    pub rerun_of: Option<String>,
}

impl RunManifest {
    pub fn content_hash(&self) -> String {
        sha256_hex(&serde_json::to_vec(self).expect("manifest serializes"))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading manifest {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing manifest {}", path.display()))
    }
}

pub fn now_unix() -> u64 {
    std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

/// Keeps examples of the requested task; untagged examples always pass.
pub fn filter_task(examples: Vec<Example>, task: Option<Task>) -> Vec<Example> {
    match task {
        None => examples,
        Some(t) => examples.into_iter().filter(|e| e.task.is_none_or(|et| et == t)).collect(),
    }
}

fn record_of(example: &Example, seed: u64, alpha: f64, outcome: Result<ProofResult, SearchError>) -> RunRecord {
    match outcome {
        Ok(r) => {
            let steps = (r.status == ProofStatus::Proved).then_some(r.steps_expanded);
            let mut rec = RunRecord::new(&example.id, example.label, r.best_entail_score(), alpha, steps);
            rec.seed = Some(seed);
            rec.status = Some(r.status);
            rec
        }
        Err(e) => {
            let best = match &e {
                SearchError::Aborted { partial, .. } => partial.best_entail_score(),
                SearchError::Invalid(_) => 0.0,
            };
            let mut rec = RunRecord::new(&example.id, example.label, best, alpha, None);
            rec.seed = Some(seed);
            rec.error = Some(e.to_string());
            rec
        }
    }
}

/// Runs every example under every seed on a pool of `jobs` workers.
/// Records come back ordered by seed, then by example.
pub fn evaluate(
    models: &dyn ModelSet,
    examples: &[Example],
    heuristic: HeuristicKind,
    search: &SearchConfig,
    seeds: &[u64],
    jobs: usize,
) -> Result<Vec<RunRecord>> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build()?;
    let work: Vec<(u64, &Example)> = seeds.iter().flat_map(|&s| examples.iter().map(move |e| (s, e))).collect();
    Ok(pool.install(|| {
        work.par_iter()
            .map(|&(seed, example)| {
                let config = SearchConfig { rng_seed: seed, ..*search };
                let outcome = models.run(example, heuristic, &config, &mut |_| {});
                record_of(example, seed, search.alpha, outcome)
            })
            .collect()
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

impl MeanStd {
    fn of(values: &[f64]) -> Option<Self> {
        mean_std(values).ok().map(|(mean, std)| MeanStd { mean, std, n: values.len() })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedMetrics {
    pub seed: u64,
    pub records: usize,
    pub errored: usize,
    /// Percentage of valid goals reached.
    pub goal_rate: Option<f64>,
    pub auroc: Option<f64>,
    /// Mean and population std of steps to the goal over proved valid goals.
    pub steps: Option<MeanStd>,
    /// Thresholds at which the PR curve is undefined.
    pub omitted_thresholds: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub alpha: f64,
    pub per_seed: Vec<SeedMetrics>,
    /// Across-seed mean and std of each per-seed metric.
    pub goal_rate: Option<MeanStd>,
    pub auroc: Option<MeanStd>,
    pub steps_mean: Option<MeanStd>,
    pub errored: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub seed: u64,
    #[serde(flatten)]
    pub point: CurvePoint,
}

fn metric<T>(what: &str, seed: u64, r: Result<T, deduce_core::Error>) -> Option<T> {
    r.map_err(|e| log::warn!("seed {seed}: {what} undefined: {e}")).ok()
}

/// Metrics per seed over completed records, plus across-seed aggregates.
pub fn summarize(records: &[RunRecord], alpha: f64, extra_thresholds: &[f64]) -> (MetricsReport, Vec<CurveRow>) {
    let mut seeds: Vec<u64> = records.iter().map(|r| r.seed.unwrap_or(0)).collect();
    seeds.dedup();
    let mut per_seed = Vec::new();
    let mut rows = Vec::new();
    for seed in seeds {
        let all: Vec<&RunRecord> = records.iter().filter(|r| r.seed.unwrap_or(0) == seed).collect();
        let done: Vec<RunRecord> = all.iter().filter(|r| r.error.is_none()).map(|r| (*r).clone()).collect();
        let errored = all.len() - done.len();
        if errored > 0 {
            log::warn!("seed {seed}: {errored} example(s) errored; metrics use the {} completed", done.len());
        }
        let mut thresholds = default_grid(&done.iter().map(|r| r.best_entail_score).collect::<Vec<_>>());
        thresholds.extend_from_slice(extra_thresholds);
        thresholds.sort_by(f64::total_cmp);
        thresholds.dedup();
        let curve = metric("pr curve", seed, pr_curve(&done, &thresholds)).unwrap_or_default();
        if !curve.omitted.is_empty() {
            log::info!("seed {seed}: {} threshold(s) with no positive predictions omitted from the curve", curve.omitted.len());
        }
        rows.extend(curve.points.iter().map(|&point| CurveRow { seed, point }));
        per_seed.push(SeedMetrics {
            seed,
            records: all.len(),
            errored,
            goal_rate: metric("goal rate", seed, goal_rate(&done, alpha)),
            auroc: metric("auroc", seed, auroc_of_records(&done)),
            steps: metric("steps", seed, steps_stats(&done)).map(|(mean, std)| MeanStd {
                mean,
                std,
                n: done.iter().filter(|r| r.steps_to_goal.is_some() && r.proved_at_alpha).count(),
            }),
            omitted_thresholds: curve.omitted,
        });
    }
    let across = |f: &dyn Fn(&SeedMetrics) -> Option<f64>| MeanStd::of(&per_seed.iter().filter_map(f).collect::<Vec<_>>());
    let report = MetricsReport {
        alpha,
        goal_rate: across(&|m| m.goal_rate),
        auroc: across(&|m| m.auroc),
        steps_mean: across(&|m| m.steps.map(|s| s.mean)),
        errored: per_seed.iter().map(|m| m.errored).sum(),
        per_seed,
    };
    (report, rows)
}

pub fn curve_csv(rows: &[CurveRow]) -> String {
    let mut out = String::from("seed,threshold,precision,recall,tpr,fpr\n");
    for r in rows {
        let p = r.point;
        out.push_str(&format!("{},{},{},{},{},{}\n", r.seed, p.threshold, p.precision, p.recall, p.tpr, p.fpr));
    }
    out
}

#[derive(Debug)]
pub struct BatchOutcome {
    pub dir: PathBuf,
    pub records: Vec<RunRecord>,
    pub report: MetricsReport,
}

/// Evaluates, then writes `manifest.json`, `records.jsonl`, `metrics.json`
/// and `curve.csv` into `out_root/run-<manifest hash>`. An existing run
/// directory is never overwritten.
pub fn run_batch(manifest: &RunManifest, examples: &[Example], models: &dyn ModelSet, out_root: &Path) -> Result<BatchOutcome> {
    let dir = out_root.join(format!("run-{}", &manifest.content_hash()[..16]));
    fs::create_dir_all(out_root).with_context(|| format!("creating {}", out_root.display()))?;
    fs::create_dir(&dir).with_context(|| format!("run directory {} already exists or cannot be created", dir.display()))?;
    fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(manifest)? + "\n")?;

    let records = evaluate(models, examples, manifest.heuristic, &manifest.search, &manifest.seeds, manifest.jobs)?;
    let (report, rows) = summarize(&records, manifest.search.alpha, &manifest.thresholds);
    fs::write(dir.join("records.jsonl"), crate::io::to_jsonl(&records)?)?;
    fs::write(dir.join("metrics.json"), serde_json::to_string_pretty(&report)? + "\n")?;
    fs::write(dir.join("curve.csv"), curve_csv(&rows))?;
    Ok(BatchOutcome { dir, records, report })
}
