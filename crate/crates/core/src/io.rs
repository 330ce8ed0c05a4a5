//! Instance and trace files.
//!
//! Instances are JSON objects `{"n": .., "entries": [[i, j, v], ..]}` with an
//! optional `"metadata": {"family", "params", "seed"}` block. A plain-text
//! form is also read: the dimension on the first line, then one `i j v`
//! triple per line; `#` starts a comment.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{QuboError, Result};
use crate::problems::{Family, Params, ProblemInstance};
use crate::qubo::QuboMatrix;
use crate::search::{ReductionTrace, TraceStep};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceMetadata {
    pub family: Family,
    pub params: Params,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceFile {
    #[serde(flatten)]
    pub matrix: QuboMatrix,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metadata: Option<InstanceMetadata>,
}

impl From<QuboMatrix> for InstanceFile {
    fn from(matrix: QuboMatrix) -> Self {
        InstanceFile {
            matrix,
            metadata: None,
        }
    }
}

impl From<ProblemInstance> for InstanceFile {
    fn from(p: ProblemInstance) -> Self {
        InstanceFile {
            matrix: p.matrix,
            metadata: Some(InstanceMetadata {
                family: p.family,
                params: p.params,
                seed: p.seed,
            }),
        }
    }
}

impl TryFrom<InstanceFile> for ProblemInstance {
    type Error = QuboError;
    fn try_from(f: InstanceFile) -> Result<Self> {
        let meta = f
            .metadata
            .ok_or_else(|| QuboError::Parse("instance has no metadata block".into()))?;
        Ok(ProblemInstance {
            family: meta.family,
            params: meta.params,
            seed: meta.seed,
            matrix: f.matrix,
        })
    }
}

fn parse_text(text: &str) -> Result<QuboMatrix> {
    let mut lines = text
        .lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .enumerate()
        .filter(|(_, l)| !l.is_empty());
    let (_, first) = lines
        .next()
        .ok_or_else(|| QuboError::Parse("empty instance".into()))?;
    let n: usize = first
        .parse()
        .map_err(|_| QuboError::Parse(format!("bad dimension {first:?}")))?;
    let mut entries = Vec::new();
    for (no, line) in lines {
        let bad = || QuboError::Parse(format!("line {}: expected `i j value`", no + 1));
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(bad());
        }
        let i = fields[0].parse().map_err(|_| bad())?;
        let j = fields[1].parse().map_err(|_| bad())?;
        let v = fields[2].parse().map_err(|_| bad())?;
        entries.push((i, j, v));
    }
    QuboMatrix::from_entries(n, entries)
}

/// Parses either the JSON or the text instance format.
pub fn parse_instance(text: &str) -> Result<InstanceFile> {
    if text.trim_start().starts_with('{') {
        Ok(serde_json::from_str(text)?)
    } else {
        parse_text(text).map(InstanceFile::from)
    }
}

pub fn read_instance(path: impl AsRef<Path>) -> Result<InstanceFile> {
    parse_instance(&fs::read_to_string(path)?)
}

pub fn instance_to_json(instance: &InstanceFile) -> Result<String> {
    Ok(serde_json::to_string_pretty(instance)? + "\n")
}

pub fn write_instance(path: impl AsRef<Path>, instance: &InstanceFile) -> Result<()> {
    fs::write(path, instance_to_json(instance)?)?;
    Ok(())
}

/// On-disk trace: the initial instance and the replayable steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceFile {
    pub initial: InstanceFile,
    pub steps: Vec<TraceStep>,
}

impl TraceFile {
    pub fn new(trace: &ReductionTrace, metadata: Option<InstanceMetadata>) -> Self {
        TraceFile {
            initial: InstanceFile {
                matrix: trace.initial.clone(),
                metadata,
            },
            steps: trace.steps.clone(),
        }
    }

    pub fn to_trace(&self) -> ReductionTrace {
        let mut trace = ReductionTrace::new(self.initial.matrix.clone());
        trace.steps = self.steps.clone();
        trace
    }
}

pub fn trace_to_json(trace: &TraceFile) -> Result<String> {
    Ok(serde_json::to_string_pretty(trace)? + "\n")
}

pub fn write_trace(path: impl AsRef<Path>, trace: &TraceFile) -> Result<()> {
    fs::write(path, trace_to_json(trace)?)?;
    Ok(())
}

pub fn read_trace(path: impl AsRef<Path>) -> Result<TraceFile> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}
