use serde::{Deserialize, Serialize};

use crate::bounds::pruning_bound;
use crate::error::{QuboError, Result};
use crate::metrics::ValueSet;
use crate::qubo::QuboMatrix;

use super::{dr_or_zero, IndexMode, Move, ReductionTrace, Reducer, SearchReport, TraceStep};

/// Branch-and-bound parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BnbConfig {
    /// Total number of steps `T`.
    pub horizon: usize,
    /// Steps `T~` completed by the base policy below the tree; the tree has depth `T - T~`.
    pub rollout_depth: usize,
    /// Tree depths at which nodes are completed to tighten the incumbent.
    pub update_depth: usize,
    pub use_bounds: bool,
}

impl BnbConfig {
    pub fn new(horizon: usize, rollout_depth: usize) -> Self {
        BnbConfig {
            horizon,
            rollout_depth,
            update_depth: 1,
            use_bounds: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.rollout_depth > self.horizon {
            return Err(QuboError::InvalidHorizon(format!(
                "rollout depth {} exceeds horizon {}",
                self.rollout_depth, self.horizon
            )));
        }
        if self.update_depth == 0 {
            return Err(QuboError::InvalidParameter(
                "update depth must be at least 1".into(),
            ));
        }
        Ok(())
    }

    pub fn tree_depth(&self) -> usize {
        self.horizon - self.rollout_depth
    }
}

fn move_step(m: &Move) -> TraceStep {
    TraceStep {
        k: m.action.k,
        l: m.action.l,
        w: m.w,
        dr: m.dr,
    }
}

struct Search<'a> {
    reducer: &'a Reducer,
    config: BnbConfig,
    best: f64,
    best_steps: Vec<TraceStep>,
    path: Vec<TraceStep>,
    curve: Vec<f64>,
    expanded: u64,
    pruned: u64,
}

impl Search<'_> {
    /// Records a completed value reached at tree depth `depth`.
    fn offer(&mut self, depth: usize, value: f64, tail: &[TraceStep]) {
        self.curve[depth] = self.curve[depth].min(value);
        if value < self.best {
            self.best = value;
            self.best_steps = self.path.iter().chain(tail).copied().collect();
        }
    }

    fn complete(&mut self, depth: usize, state: &QuboMatrix) -> Result<()> {
        let residual = self.config.horizon - depth;
        let tail = self.reducer.base_rollout(state, residual)?;
        self.offer(depth, tail.final_dr(), &tail.steps);
        Ok(())
    }

    fn visit(&mut self, state: &QuboMatrix, depth: usize) -> Result<()> {
        let moves = self.reducer.ranked_moves(state)?;
        let tree_depth = self.config.tree_depth();
        let d1 = depth + 1;
        let residual = self.config.horizon - d1;
        for m in moves.iter().filter(|m| !m.is_noop()) {
            let child = m.apply(state);
            self.path.push(move_step(m));
            // the child itself is a final state once the remaining steps are no-ops
            self.offer(d1, m.dr, &[]);
            if d1 % self.config.update_depth == 0 && d1 < tree_depth {
                self.complete(d1, &child)?;
            }
            if self.config.use_bounds
                && self.best < pruning_bound(&ValueSet::from_matrix(&child), residual)
            {
                self.pruned += 1;
            } else {
                self.expanded += 1;
                if d1 == tree_depth {
                    if residual > 0 {
                        self.complete(d1, &child)?;
                    }
                } else {
                    self.visit(&child, d1)?;
                }
            }
            self.path.pop();
        }
        Ok(())
    }
}

impl Reducer {
    /// Depth-first branch and bound over the first `T - T~` steps.
    pub fn branch_and_bound(&self, q: &QuboMatrix, config: &BnbConfig) -> Result<SearchReport> {
        config.validate()?;
        let tree_depth = config.tree_depth();
        let mut search = Search {
            reducer: self,
            config: *config,
            best: f64::INFINITY,
            best_steps: Vec::new(),
            path: Vec::new(),
            curve: vec![f64::INFINITY; tree_depth + 1],
            expanded: 0,
            pruned: 0,
        };
        search.offer(0, dr_or_zero(q), &[]);
        search.complete(0, q)?;
        if tree_depth > 0 {
            search.visit(q, 0)?;
        }
        let mut curve = search.curve;
        for d in 1..curve.len() {
            curve[d] = curve[d].min(curve[d - 1]);
        }
        let total = search.expanded + search.pruned;
        let mut best_trace = ReductionTrace::new(q.clone());
        best_trace.steps = search.best_steps;
        Ok(SearchReport {
            best_trace,
            nodes_expanded: search.expanded,
            nodes_pruned: search.pruned,
            pruned_fraction: if total == 0 {
                0.0
            } else {
                search.pruned as f64 / total as f64
            },
            best_dr_curve: curve,
        })
    }
}

/// Branch and bound with a fresh strict reducer.
pub fn branch_and_bound(
    q: &QuboMatrix,
    horizon: usize,
    rollout_depth: usize,
    mode: IndexMode,
    update_depth: usize,
) -> Result<SearchReport> {
    let config = BnbConfig {
        horizon,
        rollout_depth,
        update_depth,
        use_bounds: true,
    };
    Reducer::new(mode).branch_and_bound(q, &config)
}
