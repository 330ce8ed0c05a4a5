use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{QuboError, Result};
use crate::io::{InstanceMetadata, TraceFile};
use crate::metrics::max_coeff_ratio;
use crate::problems::{generate_suite, Family, ProblemInstance};
use crate::qubo::{solve_exhaustive_with_cap, QuboMatrix, DEFAULT_EXHAUSTIVE_CAP};
use crate::search::{IndexMode, Policy, ReductionTrace, Reducer, SearchReport};

use super::{median_relative_energy, simulated_annealing};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteConfig {
    pub family: Family,
    pub n: usize,
    pub count: usize,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyConfig {
    /// Row label; defaults to the policy label.
    #[serde(default)]
    pub name: Option<String>,
    pub policy: Policy,
    #[serde(default)]
    pub index_mode: IndexMode,
}

impl PolicyConfig {
    pub fn new(policy: Policy, index_mode: IndexMode) -> Self {
        PolicyConfig {
            name: None,
            policy,
            index_mode,
        }
    }

    pub fn label(&self) -> String {
        self.name.clone().unwrap_or_else(|| self.policy.label())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub samples: usize,
    pub sweeps: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub beta_range: Option<(f64, f64)>,
}

fn default_jobs() -> usize {
    1
}

fn default_cap() -> usize {
    DEFAULT_EXHAUSTIVE_CAP
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub suites: Vec<SuiteConfig>,
    #[serde(default)]
    pub policies: Vec<PolicyConfig>,
    #[serde(default)]
    pub horizons: Vec<usize>,
    #[serde(default)]
    pub sampler: Option<SamplerConfig>,
    /// Adds one uncompressed row per instance.
    #[serde(default)]
    pub include_original: bool,
    #[serde(default = "default_jobs")]
    pub jobs: usize,
    #[serde(default = "default_cap")]
    pub exhaustive_cap: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            suites: Vec::new(),
            policies: Vec::new(),
            horizons: Vec::new(),
            sampler: None,
            include_original: false,
            jobs: 1,
            exhaustive_cap: DEFAULT_EXHAUSTIVE_CAP,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.jobs == 0 {
            return Err(QuboError::InvalidParameter("jobs must be at least 1".into()));
        }
        for s in &self.suites {
            if s.n == 0 {
                return Err(QuboError::EmptyDimension);
            }
        }
        if let Some(s) = &self.sampler {
            if s.samples == 0 || s.sweeps == 0 {
                return Err(QuboError::InvalidParameter(
                    "sampler needs positive samples and sweeps".into(),
                ));
            }
        }
        for p in &self.policies {
            p.policy.validate()?;
            if let Policy::BranchAndBound { rollout_depth, .. } = p.policy {
                if let Some(t) = self.horizons.iter().find(|&&t| t < rollout_depth) {
                    return Err(QuboError::InvalidHorizon(format!(
                        "rollout depth {rollout_depth} exceeds horizon {t}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// One instance under one policy and horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub family: Family,
    pub n: usize,
    pub seed: u64,
    pub policy: String,
    pub horizon: usize,
    pub dr_initial: f64,
    pub dr_final: f64,
    pub rel_reduction: f64,
    pub cmax_initial: Option<f64>,
    pub cmax_final: Option<f64>,
    pub pruned_fraction: f64,
    pub median_rel_energy: Option<f64>,
    pub n_opt: Option<usize>,
    /// Samples whose energy has the opposite sign of the optimum.
    pub mixed_sign: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowRecord {
    #[serde(flatten)]
    pub row: ReportRow,
    pub trace: TraceFile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub rows: Vec<RowRecord>,
}

impl ExperimentReport {
    pub fn rows(&self) -> impl Iterator<Item = &ReportRow> {
        self.rows.iter().map(|r| &r.row)
    }
}

struct Task<'a> {
    instance: &'a ProblemInstance,
    policy: Option<&'a PolicyConfig>,
    horizon: usize,
}

fn quality(
    original: &QuboMatrix,
    compressed: &QuboMatrix,
    sampler: &SamplerConfig,
    seed: u64,
    cap: usize,
) -> Result<(Option<f64>, Option<usize>, Option<usize>)> {
    if original.n() > cap {
        return Ok((None, None, None));
    }
    let optimum = solve_exhaustive_with_cap(original, cap)?.optimum_energy;
    let set = simulated_annealing(
        compressed,
        sampler.samples,
        sampler.sweeps,
        sampler.beta_range,
        sampler.seed ^ seed,
    )?
    .rescored(original)?;
    let mixed = set
        .samples
        .iter()
        .filter(|s| s.energy * optimum < 0.0)
        .count();
    Ok((
        median_relative_energy(&set, optimum),
        Some(set.count_optimal(optimum)),
        Some(mixed),
    ))
}

fn run_task(task: &Task, config: &ExperimentConfig) -> Result<RowRecord> {
    let inst = task.instance;
    let q = &inst.matrix;
    let (label, report) = match task.policy {
        Some(p) => {
            let reducer = Reducer::new(p.index_mode);
            (p.label(), reducer.run(q, &p.policy, task.horizon)?)
        }
        None => {
            let trace = ReductionTrace::new(q.clone());
            ("original".to_string(), SearchReport::from_trace(trace))
        }
    };
    let trace = &report.best_trace;
    let compressed = trace.replay()?;
    let dr_initial = trace.initial_dr;
    let dr_final = trace.final_dr();
    let (median_rel_energy, n_opt, mixed_sign) = match &config.sampler {
        Some(s) => quality(q, &compressed, s, inst.seed, config.exhaustive_cap)?,
        None => (None, None, None),
    };
    let row = ReportRow {
        family: inst.family,
        n: q.n(),
        seed: inst.seed,
        policy: label,
        horizon: task.horizon,
        dr_initial,
        dr_final,
        rel_reduction: if dr_initial > 0.0 {
            (dr_initial - dr_final) / dr_initial
        } else {
            0.0
        },
        cmax_initial: max_coeff_ratio(q).ok(),
        cmax_final: max_coeff_ratio(&compressed).ok(),
        pruned_fraction: report.pruned_fraction,
        median_rel_energy,
        n_opt,
        mixed_sign,
    };
    let metadata = InstanceMetadata {
        family: inst.family,
        params: inst.params.clone(),
        seed: inst.seed,
    };
    Ok(RowRecord {
        row,
        trace: TraceFile::new(trace, Some(metadata)),
    })
}

/// Generates the suites, runs every policy and horizon and scores the
/// compressed matrices under the original ones. Rows follow the order
/// suite, instance, policy, horizon, independent of `jobs`.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let instances: Vec<ProblemInstance> = config
        .suites
        .iter()
        .map(|s| generate_suite(s.family, s.n, s.count, s.seed))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    let mut tasks = Vec::new();
    for instance in &instances {
        if config.include_original {
            tasks.push(Task {
                instance,
                policy: None,
                horizon: 0,
            });
        }
        for p in &config.policies {
            for &horizon in &config.horizons {
                tasks.push(Task {
                    instance,
                    policy: Some(p),
                    horizon,
                });
            }
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.jobs)
        .build()
        .map_err(|e| QuboError::InvalidParameter(e.to_string()))?;
    let rows = pool.install(|| {
        tasks
            .par_iter()
            .map(|t| run_task(t, config))
            .collect::<Result<Vec<_>>>()
    })?;
    Ok(ExperimentReport {
        config: config.clone(),
        rows,
    })
}

pub fn write_csv(report: &ExperimentReport, out: impl std::io::Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in report.rows() {
        w.serialize(row)
            .map_err(|e| QuboError::Io(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json(report: &ExperimentReport, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(report)? + "\n")?;
    Ok(())
}
