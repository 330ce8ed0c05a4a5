use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::qubo::{solve_bits, Action, QuboMatrix};

use super::{dr_or_zero, Move};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub k: usize,
    pub l: usize,
    pub w: f64,
    /// Dynamic range after this step.
    pub dr: f64,
}

impl TraceStep {
    pub fn action(&self) -> Action {
        Action {
            k: self.k,
            l: self.l,
        }
    }
}

/// Initial matrix plus the applied updates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReductionTrace {
    pub initial: QuboMatrix,
    pub initial_dr: f64,
    pub steps: Vec<TraceStep>,
}

impl ReductionTrace {
    pub fn new(initial: QuboMatrix) -> Self {
        let initial_dr = dr_or_zero(&initial);
        ReductionTrace {
            initial,
            initial_dr,
            steps: Vec::new(),
        }
    }

    pub(crate) fn push_move(&mut self, m: &Move) {
        self.steps.push(TraceStep {
            k: m.action.k,
            l: m.action.l,
            w: m.w,
            dr: m.dr,
        });
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Applies every step to the initial matrix.
    pub fn replay(&self) -> Result<QuboMatrix> {
        self.steps.iter().try_fold(self.initial.clone(), |q, s| {
            q.apply_update(s.action(), s.w)
        })
    }

    /// Matrices after each step, starting with the initial one.
    pub fn states(&self) -> Result<Vec<QuboMatrix>> {
        let mut out = vec![self.initial.clone()];
        for s in &self.steps {
            let next = out.last().unwrap().apply_update(s.action(), s.w)?;
            out.push(next);
        }
        Ok(out)
    }

    pub fn final_dr(&self) -> f64 {
        self.steps.last().map_or(self.initial_dr, |s| s.dr)
    }

    /// Sum of per-step DR decreases.
    pub fn cumulative_reward(&self) -> f64 {
        self.initial_dr - self.final_dr()
    }

    /// Whether replaying reproduces every recorded DR.
    pub fn drs_consistent(&self) -> Result<bool> {
        let states = self.states()?;
        Ok(dr_or_zero(&states[0]) == self.initial_dr
            && self
                .steps
                .iter()
                .zip(&states[1..])
                .all(|(s, q)| dr_or_zero(q) == s.dr))
    }
}

/// Why a trace failed verification.
#[derive(Debug, Clone, PartialEq)]
pub enum TraceFault {
    /// Step `step` (0-based) could not be applied.
    Replay { step: usize, reason: String },
    /// The recorded DR after `step` (`None` for the initial value) differs from the replay.
    DrMismatch { step: Option<usize>, recorded: f64, actual: f64 },
    /// An optimizer of the initial matrix is not optimal after `step`.
    InclusionLost { step: usize },
}

impl std::fmt::Display for TraceFault {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TraceFault::Replay { step, reason } => write!(f, "step {step}: {reason}"),
            TraceFault::DrMismatch {
                step: None,
                recorded,
                actual,
            } => write!(f, "initial dr {recorded} recorded, {actual} replayed"),
            TraceFault::DrMismatch {
                step: Some(step),
                recorded,
                actual,
            } => write!(f, "step {step}: dr {recorded} recorded, {actual} replayed"),
            TraceFault::InclusionLost { step } => {
                write!(f, "step {step}: an initial optimizer is no longer optimal")
            }
        }
    }
}

impl ReductionTrace {
    /// Replays the trace and checks every recorded DR and optimum inclusion
    /// after every step by enumeration. Fails with `CapExceeded` above `cap`.
    pub fn verify(&self, cap: usize) -> Result<Option<TraceFault>> {
        let (_, root) = solve_bits(&self.initial, cap)?;
        let actual = dr_or_zero(&self.initial);
        if actual != self.initial_dr {
            return Ok(Some(TraceFault::DrMismatch {
                step: None,
                recorded: self.initial_dr,
                actual,
            }));
        }
        let mut q = self.initial.clone();
        for (step, s) in self.steps.iter().enumerate() {
            q = match q.apply_update(s.action(), s.w) {
                Ok(next) => next,
                Err(e) => {
                    return Ok(Some(TraceFault::Replay {
                        step,
                        reason: e.to_string(),
                    }))
                }
            };
            let actual = dr_or_zero(&q);
            if actual != s.dr {
                return Ok(Some(TraceFault::DrMismatch {
                    step: Some(step),
                    recorded: s.dr,
                    actual,
                }));
            }
            let (_, opt) = solve_bits(&q, cap)?;
            if !root.iter().all(|z| opt.binary_search(z).is_ok()) {
                return Ok(Some(TraceFault::InclusionLost { step }));
            }
        }
        Ok(None)
    }
}

/// Outcome of a policy run; the counters are only nonzero for branch and bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchReport {
    pub best_trace: ReductionTrace,
    pub nodes_expanded: u64,
    pub nodes_pruned: u64,
    pub pruned_fraction: f64,
    /// Best final DR known after finishing each tree depth.
    pub best_dr_curve: Vec<f64>,
}

impl SearchReport {
    pub fn from_trace(trace: ReductionTrace) -> Self {
        let best = trace.final_dr();
        SearchReport {
            best_trace: trace,
            nodes_expanded: 0,
            nodes_pruned: 0,
            pruned_fraction: 0.0,
            best_dr_curve: vec![best],
        }
    }

    pub fn final_dr(&self) -> f64 {
        self.best_trace.final_dr()
    }
}
