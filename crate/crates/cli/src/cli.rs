use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use deduce_core::calibration::{cross_validate, LabeledPair};
use deduce_core::dataset::{build_heuristic_examples, expand_with_distractors, extract_step_examples, make_negative_goals, Example, GoalLabel, Task};
use deduce_core::synthetic;
use deduce_core::{HeuristicKind, ProofResult, ProofStatus, SearchEvent};

use crate::batch::{self, DatasetRef, RunManifest};
use crate::config::{self, BackendSpec, ConfigFile};
use crate::io::{read_examples, read_jsonl, read_lines, write_jsonl};
use crate::render;

#[derive(Debug, Parser)]
#[command(name = "deduce", version, about = "Heuristic best-first search for natural-language proofs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Search for a proof of one goal and print the tree.
    Prove(ProveArgs),
    /// Evaluate a dataset of valid and invalid goals.
    BatchEval(BatchArgs),
    /// Add hard negative goals borrowed from similar examples.
    MakeNegatives(NegativesArgs),
    /// Pad examples with retrieved distractor premises.
    Expand(ExpandArgs),
    /// Write step-model and heuristic training pairs from gold trees.
    ExtractSteps(ExtractArgs),
    /// Pick the goal-entailment threshold by goal-disjoint cross-validation.
    Calibrate(CalibrateArgs),
    /// Generate a synthetic valid/invalid suite.
    SynthGen(SynthArgs),
    /// Render a saved search result.
    Render(RenderArgs),
}

#[derive(Debug, Clone, Args)]
pub struct SearchFlags {
    /// JSON config file; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub heuristic: Option<HeuristicKind>,
    /// `synthetic` or a server base URL (default: $DEDUCTION_BACKEND_URL, else synthetic).
    #[arg(long)]
    pub backend: Option<BackendSpec>,
    #[arg(long)]
    pub max_steps: Option<u32>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub top_p: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
}

impl SearchFlags {
    fn as_config(&self) -> ConfigFile {
        ConfigFile {
            max_steps: self.max_steps,
            alpha: self.alpha,
            top_p: self.top_p,
            rng_seed: self.seed,
            heuristic: self.heuristic,
            backend: self.backend.clone(),
            ..Default::default()
        }
    }
}

#[derive(Debug, Args)]
pub struct ProveArgs {
    /// A premise; repeat for each.
    #[arg(long = "premise")]
    pub premise: Vec<String>,
    /// File with one premise per line.
    #[arg(long)]
    pub premises: Option<PathBuf>,
    #[arg(long)]
    pub goal: String,
    #[command(flatten)]
    pub search: SearchFlags,
    /// Print DOT instead of the ASCII tree.
    #[arg(long)]
    pub dot: bool,
    /// Also save the full result as JSON (input for `render`).
    #[arg(long)]
    pub json_out: Option<PathBuf>,
    /// Do not stream steps as they are derived.
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Debug, Args)]
pub struct BatchArgs {
    /// Dataset JSONL (native or EntailmentBank records).
    #[arg(long, required_unless_present = "manifest")]
    pub dataset: Option<PathBuf>,
    /// Only evaluate examples of this task (untagged examples are kept).
    #[arg(long, value_parser = parse_task)]
    pub task: Option<Task>,
    #[command(flatten)]
    pub search: SearchFlags,
    /// Comma-separated trial seeds.
    #[arg(long, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Extra PR-curve threshold; repeatable.
    #[arg(long = "threshold")]
    pub thresholds: Vec<f64>,
    /// Parent directory of run directories.
    #[arg(long, default_value = "runs")]
    pub out: PathBuf,
    /// Re-run exactly the configuration recorded in this manifest.
    #[arg(long, conflicts_with_all = ["dataset", "task", "seeds", "thresholds"])]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct NegativesArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    /// Write only the new negatives instead of inputs followed by negatives.
    #[arg(long)]
    pub only_negatives: bool,
}

#[derive(Debug, Args)]
pub struct ExpandArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    /// Distractor statements, one per line (default: every premise in the input).
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long, default_value_t = 25)]
    pub k: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Step-model examples `{input_1, input_2, conclusion}`.
    #[arg(long)]
    pub output: PathBuf,
    /// Also write labeled pairs for training a learned heuristic.
    #[arg(long)]
    pub heuristic_out: Option<PathBuf>,
    /// Include the goal in heuristic examples.
    #[arg(long)]
    pub with_goal: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    /// Scored labeled pairs, JSONL.
    #[arg(long)]
    pub pairs: PathBuf,
    #[arg(long, default_value_t = 3)]
    pub folds: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Explicit threshold grid (comma-separated); default is every observed score plus midpoints.
    #[arg(long, value_delimiter = ',')]
    pub grid: Option<Vec<f64>>,
    /// Report path; stdout when omitted.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Number of worlds; each yields one valid and one invalid example.
    #[arg(long, default_value_t = 10)]
    pub pairs: usize,
    #[arg(long, value_delimiter = ',', default_value = "1,2,3,4")]
    pub depths: Vec<usize>,
    /// Distractor premises sampled from the world.
    #[arg(long, default_value_t = 0)]
    pub distractors: usize,
    /// Expand each example to this many premises by retrieval (25 gives task2).
    #[arg(long, conflicts_with = "distractors")]
    pub task2_size: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    /// A result saved by `prove --json-out`.
    pub file: PathBuf,
    #[arg(long)]
    pub dot: bool,
}

fn parse_task(s: &str) -> Result<Task, String> {
    match s {
        "task1" => Ok(Task::Task1),
        "task2" => Ok(Task::Task2),
        other => Err(format!("expected task1 or task2, got {other:?}")),
    }
}

/// Runs a command and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    let outcome = match cli.command {
        Command::Prove(a) => prove(a),
        Command::BatchEval(a) => batch_eval(a).map(|()| 0),
        Command::MakeNegatives(a) => make_negatives(a).map(|()| 0),
        Command::Expand(a) => expand(a).map(|()| 0),
        Command::ExtractSteps(a) => extract_steps(a).map(|()| 0),
        Command::Calibrate(a) => calibrate(a).map(|()| 0),
        Command::SynthGen(a) => synth_gen(a).map(|()| 0),
        Command::Render(a) => render_cmd(a).map(|()| 0),
    };
    outcome.unwrap_or_else(|e| {
        eprintln!("error: {e:#}");
        2
    })
}

fn load_config(path: Option<&Path>) -> Result<ConfigFile> {
    ConfigFile::load_opt(path)
}

fn prove(a: ProveArgs) -> Result<i32> {
    let mut premises = a.premise.clone();
    if let Some(path) = &a.premises {
        premises.extend(read_lines(path)?);
    }
    if premises.len() < 2 {
        bail!("need at least 2 premises, got {}", premises.len());
    }
    let settings = config::resolve(a.search.as_config(), load_config(a.search.config.as_deref())?)?;
    let example = Example {
        id: "cli".to_string(),
        premises,
        goal: a.goal.clone(),
        label: GoalLabel::ValidGoal,
        task: None,
        gold_tree: None,
    };
    let models = batch::models_for(&settings.backend);
    let quiet = a.quiet;
    let n_premises = example.premises.len() as u32;
    let mut derived_at = std::collections::HashMap::new();
    let mut observer = |e: SearchEvent<'_>| {
        if let SearchEvent::Step(s) = e {
            derived_at.insert(s.conclusion.id, s.index);
            if !quiet {
                let name = |id: deduce_core::StatementId| match derived_at.get(&id) {
                    Some(i) if id.0 >= n_premises => format!("i{i}"),
                    _ => format!("p{}", id.0),
                };
                println!(
                    "step {}: {} + {} -> {} (entail {:.3})",
                    s.index,
                    name(s.inputs[0]),
                    name(s.inputs[1]),
                    s.conclusion.text,
                    s.goal_entail_score
                );
            }
        }
    };
    let result: ProofResult = match models.run(&example, settings.heuristic, &settings.search, &mut observer) {
        Ok(r) => r,
        Err(e) => {
            if let deduce_core::SearchError::Aborted { partial, .. } = &e {
                eprintln!("{}", render::ascii(partial));
            }
            return Err(e.into());
        }
    };
    if let Some(path) = &a.json_out {
        std::fs::write(path, serde_json::to_string_pretty(&result)? + "\n").with_context(|| format!("writing {}", path.display()))?;
    }
    print!("{}", if a.dot { render::dot(&result) } else { render::ascii(&result) });
    Ok(if result.status == ProofStatus::Proved { 0 } else { 1 })
}

fn batch_eval(a: BatchArgs) -> Result<()> {
    let (manifest, examples) = match &a.manifest {
        Some(path) => {
            let previous = RunManifest::load(path)?;
            let examples = batch::filter_task(read_examples(&previous.dataset.path)?, previous.task);
            let current = DatasetRef::of(&previous.dataset.path)?;
            if current.sha256 != previous.dataset.sha256 {
                bail!("dataset {} changed since the manifest was written (sha256 {} vs {})", previous.dataset.path.display(), current.sha256, previous.dataset.sha256);
            }
            let manifest = RunManifest {
                created_unix: batch::now_unix(),
                rerun_of: Some(previous.content_hash()),
                ..previous
            };
            (manifest, examples)
        }
        None => {
            let path = a.dataset.as_ref().expect("clap requires --dataset without --manifest");
            let mut flags = a.search.as_config();
            flags.seeds = a.seeds.clone();
            flags.jobs = a.jobs;
            let settings = config::resolve(flags, load_config(a.search.config.as_deref())?)?;
            let examples = batch::filter_task(read_examples(path)?, a.task);
            let mut dataset = DatasetRef::of(path)?;
            dataset.examples = examples.len();
            let manifest = RunManifest {
                tool: env!("CARGO_PKG_NAME").to_string(),
                version: env!("CARGO_PKG_VERSION").to_string(),
                search: settings.search,
                heuristic: settings.heuristic,
                backend: settings.backend,
                dataset,
                task: a.task,
                seeds: settings.seeds,
                jobs: settings.jobs,
                thresholds: a.thresholds.clone(),
                created_unix: batch::now_unix(),
                rerun_of: None,
            };
            (manifest, examples)
        }
    };
    if examples.is_empty() {
        bail!("no examples to evaluate");
    }
    let models = batch::models_for(&manifest.backend);
    let out = batch::run_batch(&manifest, &examples, models.as_ref(), &a.out)?;
    println!("{}", out.dir.display());
    println!("{}", serde_json::to_string_pretty(&out.report)?);
    if out.report.errored > 0 {
        log::warn!("{} run(s) errored; see records.jsonl", out.report.errored);
    }
    Ok(())
}

fn make_negatives(a: NegativesArgs) -> Result<()> {
    let examples = read_examples(&a.input)?;
    let negatives = make_negative_goals(&examples)?;
    let skipped = examples.iter().filter(|e| e.label == GoalLabel::ValidGoal).count() - negatives.len();
    if skipped > 0 {
        log::warn!("{skipped} valid example(s) had no eligible negative goal");
    }
    let out: Vec<Example> = if a.only_negatives { negatives } else { examples.into_iter().chain(negatives).collect() };
    write_jsonl(&a.output, &out)?;
    Ok(())
}

fn expand(a: ExpandArgs) -> Result<()> {
    let examples = read_examples(&a.input)?;
    let corpus = match &a.corpus {
        Some(p) => read_lines(p)?,
        None => examples.iter().flat_map(|e| e.premises.iter().cloned()).collect(),
    };
    let out: Vec<Example> = examples
        .iter()
        .enumerate()
        .map(|(i, e)| expand_with_distractors(e, &corpus, a.k, deduce_core::rng::mix(a.seed, i as u64)))
        .collect::<Result<_, _>>()?;
    write_jsonl(&a.output, &out)?;
    Ok(())
}

fn extract_steps(a: ExtractArgs) -> Result<()> {
    let examples = read_examples(&a.input)?;
    let proofs = examples
        .iter()
        .filter_map(|e| e.gold_proof().map(|p| p.with_context(|| format!("example {}", e.id))))
        .collect::<Result<Vec<_>>>()?;
    if proofs.is_empty() {
        bail!("no example in {} carries a gold tree", a.input.display());
    }
    write_jsonl(&a.output, &extract_step_examples(&proofs))?;
    if let Some(path) = &a.heuristic_out {
        write_jsonl(path, &build_heuristic_examples(&proofs, a.with_goal, a.seed)?)?;
    }
    Ok(())
}

fn calibrate(a: CalibrateArgs) -> Result<()> {
    let pairs: Vec<LabeledPair> = read_jsonl(&a.pairs)?;
    let report = cross_validate(&pairs, a.folds, a.seed, a.grid.as_deref())?;
    let text = serde_json::to_string_pretty(&report)? + "\n";
    match &a.output {
        Some(p) => std::fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn synth_gen(a: SynthArgs) -> Result<()> {
    let examples = synthetic::suite(a.pairs, &a.depths, a.distractors, a.task2_size, a.seed)?;
    write_jsonl(&a.output, &examples)?;
    Ok(())
}

fn render_cmd(a: RenderArgs) -> Result<()> {
    let text = std::fs::read_to_string(&a.file).with_context(|| format!("reading {}", a.file.display()))?;
    let result: ProofResult = serde_json::from_str(&text).with_context(|| format!("parsing {}", a.file.display()))?;
    if let Some(tree) = &result.tree {
        if !tree.is_well_formed() {
            bail!("{}: tree is not well formed", a.file.display());
        }
    }
    print!("{}", if a.dot { render::dot(&result) } else { render::ascii(&result) });
    Ok(())
}
