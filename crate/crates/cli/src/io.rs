//! JSONL and plain-text file formats.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use deduce_core::dataset::{parse_eb_context, parse_eb_proof, Example, GoalLabel, Task};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum InputError {
    #[error("cannot read {}", path.display())]
    Open { path: PathBuf, source: std::io::Error },
    #[error("{}:{line}: {message}", path.display())]
    Parse { path: PathBuf, line: usize, message: String },
}

fn open(path: &Path) -> Result<BufReader<File>, InputError> {
    File::open(path).map(BufReader::new).map_err(|source| InputError::Open { path: path.to_path_buf(), source })
}

/// Non-blank lines with their 1-based line numbers.
fn numbered_lines(path: &Path) -> Result<Vec<(usize, String)>, InputError> {
    let mut out = Vec::new();
    for (i, line) in open(path)?.lines().enumerate() {
        let line = line.map_err(|source| InputError::Open { path: path.to_path_buf(), source })?;
        if !line.trim().is_empty() {
            out.push((i + 1, line));
        }
    }
    Ok(out)
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, InputError> {
    numbered_lines(path)?
        .into_iter()
        .map(|(line, text)| {
            serde_json::from_str(&text).map_err(|e| InputError::Parse { path: path.to_path_buf(), line, message: e.to_string() })
        })
        .collect()
}

/// Trimmed non-blank lines, e.g. a premise list or a distractor corpus.
pub fn read_lines(path: &Path) -> Result<Vec<String>, InputError> {
    Ok(numbered_lines(path)?.into_iter().map(|(_, l)| l.trim().to_string()).collect())
}

pub fn to_jsonl<T: Serialize>(items: &[T]) -> serde_json::Result<String> {
    let mut out = String::new();
    for item in items {
        out.push_str(&serde_json::to_string(item)?);
        out.push('\n');
    }
    Ok(out)
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> std::io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for item in items {
        serde_json::to_writer(&mut w, item)?;
        w.write_all(b"\n")?;
    }
    w.flush()
}

/// An EntailmentBank record: `sentN:`-tagged context, hypothesis, and a
/// `sentN & intN -> ...` proof. Other fields are ignored.
#[derive(Debug, Clone, Deserialize)]
pub struct EbRecord {
    pub id: String,
    pub context: String,
    pub hypothesis: String,
    #[serde(default)]
    pub proof: Option<String>,
}

impl EbRecord {
    pub fn into_example(self) -> Result<Example, deduce_core::Error> {
        let premises = parse_eb_context(&self.context)?;
        let gold_tree = match self.proof.as_deref().map(str::trim) {
            Some(p) if !p.is_empty() => Some(parse_eb_proof(p, &self.hypothesis, premises.len())?),
            _ => None,
        };
        let task = match premises.len() {
            25 => Some(Task::Task2),
            2..=15 => Some(Task::Task1),
            _ => None,
        };
        Ok(Example { id: self.id, premises, goal: self.hypothesis, label: GoalLabel::ValidGoal, task, gold_tree })
    }
}

fn parse_example(text: &str) -> Result<Example, String> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| e.to_string())?;
    let example = if value.get("premises").is_some() {
        serde_json::from_value::<Example>(value).map_err(|e| e.to_string())?
    } else if value.get("context").is_some() {
        let eb: EbRecord = serde_json::from_value(value).map_err(|e| e.to_string())?;
        eb.into_example().map_err(|e| e.to_string())?
    } else {
        return Err("record has neither `premises` nor `context`".to_string());
    };
    example.validate().map_err(|e| e.to_string())?;
    Ok(example)
}

/// Reads examples in either the native schema or EntailmentBank's, validating each.
pub fn read_examples(path: &Path) -> Result<Vec<Example>, InputError> {
    numbered_lines(path)?
        .into_iter()
        .map(|(line, text)| parse_example(&text).map_err(|message| InputError::Parse { path: path.to_path_buf(), line, message }))
        .collect()
}
