//! Sequential entry updates as a decision process: index selection, greedy and
//! lookahead policies, branch and bound, and the non-preserving heuristic.

use std::collections::HashMap;
use std::str::FromStr;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::error::{QuboError, Result};
use crate::metrics::ValueSet;
use crate::preserve::{rank_updates, ExactProvider, IntervalProvider, StateBounds};
use crate::qubo::{Action, QuboMatrix};

mod bnb;
mod nonpreserving;
mod policy;
mod trace;

pub use bnb::{branch_and_bound, BnbConfig};
pub use nonpreserving::{nonpreserving_reduce, nonpreserving_trace};
pub use policy::{
    base_policy_step, default_horizon, randomized_base_step, rollout, rollout_selection_step,
    Policy,
};
pub use trace::{ReductionTrace, SearchReport, TraceFault, TraceStep};

/// Which entries are considered as actions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IndexMode {
    All,
    #[default]
    Impact,
}

impl FromStr for IndexMode {
    type Err = QuboError;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "all" => Ok(IndexMode::All),
            "impact" => Ok(IndexMode::Impact),
            other => Err(QuboError::InvalidParameter(format!(
                "unknown index mode {other:?}"
            ))),
        }
    }
}

impl std::fmt::Display for IndexMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            IndexMode::All => "all",
            IndexMode::Impact => "impact",
        })
    }
}

fn first_holder(q: &QuboMatrix, v: f64) -> Option<Action> {
    q.upper_entries()
        .find(|&(_, _, x)| x == v)
        .map(|(k, l, _)| Action { k, l })
}

/// Actions considered in state `q`, ascending.
///
/// `Impact` keeps the lexicographically first entry holding the minimum
/// value, the maximum value and each end of the smallest gap.
pub fn get_indices(q: &QuboMatrix, mode: IndexMode) -> Vec<Action> {
    match mode {
        IndexMode::All => q.actions().collect(),
        IndexMode::Impact => {
            let values = ValueSet::from_matrix(q);
            let v = values.values();
            let mut targets = vec![v[0], v[v.len() - 1]];
            if v.len() >= 2 {
                let g = (0..v.len() - 1)
                    .min_by(|&a, &b| (v[a + 1] - v[a]).total_cmp(&(v[b + 1] - v[b])))
                    .unwrap();
                targets.extend([v[g], v[g + 1]]);
            }
            let mut out: Vec<Action> = targets
                .into_iter()
                .filter_map(|t| first_holder(q, t))
                .collect();
            out.sort_unstable();
            out.dedup();
            out
        }
    }
}

/// The best verified update for one action.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Move {
    pub action: Action,
    pub w: f64,
    pub new_value: f64,
    /// Dynamic range after the move (0 when a single value remains).
    pub dr: f64,
}

impl Move {
    pub fn is_noop(&self) -> bool {
        self.w == 0.0
    }

    pub fn apply(&self, q: &QuboMatrix) -> QuboMatrix {
        q.with_entry(self.action, self.new_value)
    }
}

/// Dynamic range with the single-value case mapped to 0.
pub(crate) fn dr_or_zero(q: &QuboMatrix) -> f64 {
    ValueSet::from_matrix(q).dynamic_range().unwrap_or(0.0)
}

const CACHE_LIMIT: usize = 100_000;

/// Evaluates states: interval provider, index mode and a memo of per-state moves.
///
/// All policies are deterministic functions of the state, so the memo only
/// saves work and never changes results.
pub struct Reducer {
    provider: Arc<dyn IntervalProvider>,
    mode: IndexMode,
    memo: Mutex<HashMap<Vec<u64>, Arc<Vec<Move>>>>,
}

impl Reducer {
    pub fn new(mode: IndexMode) -> Self {
        Self::with_provider(ExactProvider::strict().into_arc(), mode)
    }

    pub fn with_provider(provider: Arc<dyn IntervalProvider>, mode: IndexMode) -> Self {
        Reducer {
            provider,
            mode,
            memo: Mutex::new(HashMap::new()),
        }
    }

    pub fn mode(&self) -> IndexMode {
        self.mode
    }

    /// One verified move per index action, ordered by (DR after, action).
    pub fn ranked_moves(&self, q: &QuboMatrix) -> Result<Arc<Vec<Move>>> {
        let key: Vec<u64> = q.raw_values().iter().map(|v| v.to_bits()).collect();
        if let Some(hit) = self.memo.lock().unwrap().get(&key) {
            return Ok(hit.clone());
        }
        let bounds = self.provider.analyze(q)?;
        let values = ValueSet::from_matrix(q);
        let actions = get_indices(q, self.mode);
        let mut moves: Vec<Move> = actions
            .iter()
            .map(|&a| best_move(q, &values, bounds.as_ref(), a))
            .collect();
        moves.sort_by(|a, b| a.dr.total_cmp(&b.dr).then(a.action.cmp(&b.action)));
        let moves = Arc::new(moves);
        let mut memo = self.memo.lock().unwrap();
        if memo.len() >= CACHE_LIMIT {
            memo.clear();
        }
        memo.insert(key, moves.clone());
        Ok(moves)
    }

    /// Greedy move: smallest DR after, ties by action.
    pub fn base_move(&self, q: &QuboMatrix) -> Result<Move> {
        let moves = self.ranked_moves(q)?;
        moves.first().copied().ok_or(QuboError::Degenerate)
    }
}

impl Default for Reducer {
    fn default() -> Self {
        Reducer::new(IndexMode::default())
    }
}

fn best_move(q: &QuboMatrix, values: &ValueSet, bounds: &dyn StateBounds, a: Action) -> Move {
    let interval = bounds.interval(a);
    rank_updates(q, values, a, interval)
        .into_iter()
        .find(|c| c.w == 0.0 || bounds.confirms(a, c.new_value))
        .map(|c| Move {
            action: a,
            w: c.w,
            new_value: c.new_value,
            dr: c.dr,
        })
        .expect("the zero update is always a candidate")
}
