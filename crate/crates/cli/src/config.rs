//! Effective settings: command-line flag, then config file, then built-in default.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use anyhow::{Context, Result};
use deduce_core::{HeuristicKind, SearchConfig};
use serde::{Deserialize, Serialize};

pub const BACKEND_URL_ENV: &str = "DEDUCTION_BACKEND_URL";

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum BackendSpec {
    /// The in-process symbolic backend.
    Synthetic,
    /// Base URL of a server speaking the JSON wire protocol.
    Remote(String),
}

impl BackendSpec {
    /// `--backend` unset and nothing in the config file: the environment
    /// endpoint if present, otherwise synthetic.
    pub fn from_env() -> Self {
        match std::env::var(BACKEND_URL_ENV) {
            Ok(url) if !url.trim().is_empty() => BackendSpec::Remote(url.trim().to_string()),
            _ => BackendSpec::Synthetic,
        }
    }
}

impl fmt::Display for BackendSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BackendSpec::Synthetic => f.write_str("synthetic"),
            BackendSpec::Remote(url) => f.write_str(url),
        }
    }
}

impl FromStr for BackendSpec {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "synthetic" => Ok(BackendSpec::Synthetic),
            url if url.starts_with("http://") || url.starts_with("https://") => Ok(BackendSpec::Remote(url.to_string())),
            other => anyhow::bail!("backend must be 'synthetic' or an http(s) URL, got {other:?}"),
        }
    }
}

impl Serialize for BackendSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for BackendSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

/// Every key is optional; unknown keys are an error so typos do not pass silently.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    pub max_steps: Option<u32>,
    pub alpha: Option<f64>,
    pub top_p: Option<f64>,
    pub rng_seed: Option<u64>,
    pub heuristic: Option<HeuristicKind>,
    pub backend: Option<BackendSpec>,
    pub seeds: Option<Vec<u64>>,
    pub jobs: Option<usize>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn load_opt(path: Option<&Path>) -> Result<Self> {
        path.map_or_else(|| Ok(Self::default()), Self::load)
    }

    /// Fields set in `self` win over `lower`.
    pub fn over(self, lower: ConfigFile) -> ConfigFile {
        ConfigFile {
            max_steps: self.max_steps.or(lower.max_steps),
            alpha: self.alpha.or(lower.alpha),
            top_p: self.top_p.or(lower.top_p),
            rng_seed: self.rng_seed.or(lower.rng_seed),
            heuristic: self.heuristic.or(lower.heuristic),
            backend: self.backend.or(lower.backend),
            seeds: self.seeds.or(lower.seeds),
            jobs: self.jobs.or(lower.jobs),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub search: SearchConfig,
    pub heuristic: HeuristicKind,
    pub backend: BackendSpec,
    pub seeds: Vec<u64>,
    pub jobs: usize,
}

pub const DEFAULT_HEURISTIC: HeuristicKind = HeuristicKind::LearnedGoal;

/// `flags` are the command-line values packed into the same shape as a file.
pub fn resolve(flags: ConfigFile, file: ConfigFile) -> Result<Settings> {
    let merged = flags.over(file);
    let defaults = SearchConfig::default();
    let search = SearchConfig {
        max_steps: merged.max_steps.unwrap_or(defaults.max_steps),
        alpha: merged.alpha.unwrap_or(defaults.alpha),
        top_p: merged.top_p.unwrap_or(defaults.top_p),
        rng_seed: merged.rng_seed.unwrap_or(defaults.rng_seed),
    };
    search.validate()?;
    let seeds = merged.seeds.unwrap_or_else(|| vec![search.rng_seed]);
    anyhow::ensure!(!seeds.is_empty(), "seed list is empty");
    let mut distinct = seeds.clone();
    distinct.sort_unstable();
    distinct.dedup();
    anyhow::ensure!(distinct.len() == seeds.len(), "seed list {seeds:?} repeats a seed");
    let jobs = merged.jobs.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    anyhow::ensure!(jobs >= 1, "--jobs must be at least 1");
    Ok(Settings {
        search,
        heuristic: merged.heuristic.unwrap_or(DEFAULT_HEURISTIC),
        backend: merged.backend.unwrap_or_else(BackendSpec::from_env),
        seeds,
        jobs,
    })
}
