use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{QuboError, Result};
use crate::qubo::{Action, QuboMatrix};

use super::bnb::BnbConfig;
use super::{dr_or_zero, IndexMode, Move, ReductionTrace, Reducer, SearchReport};

/// Policy choice together with its variant parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Policy {
    /// Greedy one-step DR minimisation.
    Base,
    /// Uniform choice among the `top_k` best one-step actions.
    RandomizedBase { top_k: usize, seed: u64 },
    /// One-step lookahead scored by base-policy rollouts.
    RolloutSelection {
        #[serde(default)]
        top_k: Option<usize>,
        #[serde(default)]
        truncation: Option<usize>,
    },
    /// Exact tree search for `T - rollout_depth` steps, then a base rollout.
    BranchAndBound {
        rollout_depth: usize,
        #[serde(default = "default_update_depth")]
        update_depth: usize,
    },
}

fn default_update_depth() -> usize {
    1
}

impl Policy {
    pub fn label(&self) -> String {
        match self {
            Policy::Base => "base".into(),
            Policy::RandomizedBase { top_k, .. } => format!("randomized_k{top_k}"),
            Policy::RolloutSelection { top_k, truncation } => {
                let mut s = String::from("rollout");
                if let Some(k) = top_k {
                    s.push_str(&format!("_k{k}"));
                }
                if let Some(t) = truncation {
                    s.push_str(&format!("_t{t}"));
                }
                s
            }
            Policy::BranchAndBound {
                rollout_depth,
                update_depth,
            } => format!("bnb_r{rollout_depth}_u{update_depth}"),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad_k = |k: usize| {
            (k == 0).then(|| QuboError::InvalidParameter("top-k must be at least 1".into()))
        };
        match self {
            Policy::RandomizedBase { top_k, .. } => bad_k(*top_k).map_or(Ok(()), Err),
            Policy::RolloutSelection { top_k: Some(k), .. } => bad_k(*k).map_or(Ok(()), Err),
            Policy::BranchAndBound { update_depth: 0, .. } => Err(QuboError::InvalidParameter(
                "update depth must be at least 1".into(),
            )),
            _ => Ok(()),
        }
    }
}

/// `ceil(2 log2 n)`, at least 1.
pub fn default_horizon(n: usize) -> usize {
    ((2.0 * (n as f64).log2()).ceil() as usize).max(1)
}

fn step_tuple(q: &QuboMatrix, m: Move) -> (Action, f64, QuboMatrix) {
    (m.action, m.w, m.apply(q))
}

impl Reducer {
    /// Base-policy trace of at most `steps` moves; stops at a fixed point.
    pub fn base_rollout(&self, q: &QuboMatrix, steps: usize) -> Result<ReductionTrace> {
        let mut trace = ReductionTrace::new(q.clone());
        let mut state = q.clone();
        for _ in 0..steps {
            let m = self.base_move(&state)?;
            if m.is_noop() {
                break;
            }
            trace.push_move(&m);
            state = m.apply(&state);
        }
        Ok(trace)
    }

    /// Final DR of a base rollout.
    pub(crate) fn base_final_dr(&self, q: &QuboMatrix, steps: usize) -> Result<f64> {
        let mut state = q.clone();
        let mut dr = dr_or_zero(q);
        for _ in 0..steps {
            let m = self.base_move(&state)?;
            if m.is_noop() {
                break;
            }
            dr = m.dr;
            state = m.apply(&state);
        }
        Ok(dr)
    }

    pub fn randomized_move(&self, q: &QuboMatrix, top_k: usize, rng: &mut impl Rng) -> Result<Move> {
        if top_k == 0 {
            return Err(QuboError::InvalidParameter("top-k must be at least 1".into()));
        }
        let moves = self.ranked_moves(q)?;
        let k = top_k.min(moves.len());
        Ok(moves[rng.gen_range(0..k)])
    }

    pub fn randomized_rollout(
        &self,
        q: &QuboMatrix,
        steps: usize,
        top_k: usize,
        seed: u64,
    ) -> Result<ReductionTrace> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut trace = ReductionTrace::new(q.clone());
        let mut state = q.clone();
        for _ in 0..steps {
            let m = self.randomized_move(&state, top_k, &mut rng)?;
            if !m.is_noop() {
                trace.push_move(&m);
                state = m.apply(&state);
            }
        }
        Ok(trace)
    }

    /// Rollout-selection move with `remaining` steps left in the horizon.
    ///
    /// Each candidate is scored by the final DR of a base rollout of
    /// `remaining - 1` steps (capped by `truncation`) from its successor.
    pub fn rollout_selection_move(
        &self,
        q: &QuboMatrix,
        remaining: usize,
        top_k: Option<usize>,
        truncation: Option<usize>,
    ) -> Result<Move> {
        if remaining == 0 {
            return Err(QuboError::InvalidHorizon("rollout selection needs T >= 1".into()));
        }
        let moves = self.ranked_moves(q)?;
        let k = top_k.unwrap_or(usize::MAX).min(moves.len());
        if k == 0 {
            return Err(QuboError::InvalidParameter("top-k must be at least 1".into()));
        }
        let depth = (remaining - 1).min(truncation.unwrap_or(usize::MAX));
        let score = |m: &Move| -> Result<f64> {
            if depth == 0 {
                return Ok(m.dr);
            }
            self.base_final_dr(&m.apply(q), depth)
        };
        let candidates = &moves[..k];
        let scores: Vec<f64> = if candidates.len() > 4 {
            candidates.par_iter().map(score).collect::<Result<_>>()?
        } else {
            candidates.iter().map(score).collect::<Result<_>>()?
        };
        let best = (0..k)
            .min_by(|&a, &b| {
                let (ma, mb) = (&candidates[a], &candidates[b]);
                scores[a]
                    .total_cmp(&scores[b])
                    .then(ma.dr.total_cmp(&mb.dr))
                    .then(mb.is_noop().cmp(&ma.is_noop()))
                    .then(ma.action.cmp(&mb.action))
            })
            .unwrap();
        Ok(candidates[best])
    }

    pub fn rollout_selection(
        &self,
        q: &QuboMatrix,
        horizon: usize,
        top_k: Option<usize>,
        truncation: Option<usize>,
    ) -> Result<ReductionTrace> {
        let mut trace = ReductionTrace::new(q.clone());
        let mut state = q.clone();
        for t in 0..horizon {
            let m = self.rollout_selection_move(&state, horizon - t, top_k, truncation)?;
            // a chosen no-op means the state is a base fixed point
            if m.is_noop() {
                break;
            }
            trace.push_move(&m);
            state = m.apply(&state);
        }
        Ok(trace)
    }

    /// Runs `policy` for `horizon` steps.
    pub fn run(&self, q: &QuboMatrix, policy: &Policy, horizon: usize) -> Result<SearchReport> {
        policy.validate()?;
        let trace = match *policy {
            Policy::Base => self.base_rollout(q, horizon)?,
            Policy::RandomizedBase { top_k, seed } => {
                self.randomized_rollout(q, horizon, top_k, seed)?
            }
            Policy::RolloutSelection { top_k, truncation } => {
                self.rollout_selection(q, horizon, top_k, truncation)?
            }
            Policy::BranchAndBound {
                rollout_depth,
                update_depth,
            } => {
                let config = BnbConfig {
                    horizon,
                    rollout_depth,
                    update_depth,
                    use_bounds: true,
                };
                return self.branch_and_bound(q, &config);
            }
        };
        Ok(SearchReport::from_trace(trace))
    }
}

/// One greedy step over the indices of `mode`.
pub fn base_policy_step(q: &QuboMatrix, mode: IndexMode) -> Result<(Action, f64, QuboMatrix)> {
    let m = Reducer::new(mode).base_move(q)?;
    Ok(step_tuple(q, m))
}

/// One step of the randomized base policy drawing from `rng`.
pub fn randomized_base_step(
    q: &QuboMatrix,
    mode: IndexMode,
    top_k: usize,
    rng: &mut impl Rng,
) -> Result<(Action, f64, QuboMatrix)> {
    let m = Reducer::new(mode).randomized_move(q, top_k, rng)?;
    Ok(step_tuple(q, m))
}

/// One rollout-selection step for horizon `horizon`.
pub fn rollout_selection_step(
    q: &QuboMatrix,
    mode: IndexMode,
    horizon: usize,
    top_k: Option<usize>,
    truncation: Option<usize>,
) -> Result<(Action, f64, QuboMatrix)> {
    let m = Reducer::new(mode).rollout_selection_move(q, horizon, top_k, truncation)?;
    Ok(step_tuple(q, m))
}

/// Trace of `policy` run for `steps` steps.
pub fn rollout(
    q: &QuboMatrix,
    policy: &Policy,
    mode: IndexMode,
    steps: usize,
) -> Result<ReductionTrace> {
    Ok(Reducer::new(mode).run(q, policy, steps)?.best_trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qubo::optimum_included;
    use crate::qubo::tests::example_q;

    fn random_matrix(n: usize, seed: u64) -> QuboMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let entries: Vec<_> = (0..n)
            .flat_map(|i| (i..n).map(move |j| (i, j)))
            .map(|(i, j)| {
                let mag = 10f64.powf(rng.gen_range(-1.0..2.5));
                (i, j, if rng.gen_bool(0.5) { mag } else { -mag })
            })
            .collect();
        QuboMatrix::from_entries(n, entries).unwrap()
    }

    #[test]
    fn base_step_shrinks_example() {
        let q = example_q();
        let (a, w, q2) = base_policy_step(&q, IndexMode::Impact).unwrap();
        assert_eq!(a, Action::new(1, 1).unwrap());
        assert!(w > 0.0);
        assert!(dr_or_zero(&q2) < 10.289);
        assert!(optimum_included(&q, &q2).unwrap());
    }

    #[test]
    fn two_value_matrix_is_fixed() {
        let q = QuboMatrix::from_dense(&[vec![3.0, 3.0], vec![0.0, 3.0]]).unwrap();
        let (_, w, q2) = base_policy_step(&q, IndexMode::All).unwrap();
        assert_eq!(w, 0.0);
        assert_eq!(q2, q);
    }

    #[test]
    fn zero_steps_is_empty() {
        let q = example_q();
        let t = rollout(&q, &Policy::Base, IndexMode::Impact, 0).unwrap();
        assert!(t.is_empty());
        assert_eq!(t.replay().unwrap(), q);
    }

    #[test]
    fn two_steps_not_worse_than_one() {
        let q = example_q();
        let one = rollout(&q, &Policy::Base, IndexMode::Impact, 1).unwrap();
        let two = rollout(&q, &Policy::Base, IndexMode::Impact, 2).unwrap();
        assert!(two.final_dr() <= one.final_dr());
    }

    #[test]
    fn traces_replay_and_telescope() {
        for seed in 0..10 {
            let q = random_matrix(6, seed);
            for policy in [
                Policy::Base,
                Policy::RandomizedBase { top_k: 3, seed },
                Policy::RolloutSelection {
                    top_k: None,
                    truncation: None,
                },
            ] {
                let t = rollout(&q, &policy, IndexMode::All, 6).unwrap();
                assert!(t.drs_consistent().unwrap());
                let states = t.states().unwrap();
                for w in states.windows(2) {
                    assert!(dr_or_zero(&w[1]) <= dr_or_zero(&w[0]));
                    assert!(optimum_included(&w[0], &w[1]).unwrap());
                }
                let reward: f64 = states
                    .windows(2)
                    .map(|w| dr_or_zero(&w[0]) - dr_or_zero(&w[1]))
                    .sum();
                assert!((reward - t.cumulative_reward()).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn top_one_randomized_equals_base() {
        let q = random_matrix(6, 3);
        let base = base_policy_step(&q, IndexMode::All).unwrap();
        for seed in 0..5 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            assert_eq!(randomized_base_step(&q, IndexMode::All, 1, &mut rng).unwrap(), base);
        }
    }

    #[test]
    fn randomized_is_seeded() {
        let q = random_matrix(7, 4);
        let p = Policy::RandomizedBase { top_k: 4, seed: 17 };
        let a = rollout(&q, &p, IndexMode::All, 8).unwrap();
        let b = rollout(&q, &p, IndexMode::All, 8).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn horizon_one_lookahead_is_greedy() {
        for seed in 0..5 {
            let q = random_matrix(6, seed);
            let base = base_policy_step(&q, IndexMode::Impact).unwrap();
            let sel = rollout_selection_step(&q, IndexMode::Impact, 1, None, None).unwrap();
            assert_eq!(sel, base);
            let trunc = rollout_selection_step(&q, IndexMode::Impact, 5, None, Some(0)).unwrap();
            assert_eq!(trunc, base);
        }
    }

    #[test]
    fn lookahead_dominates_greedy() {
        for seed in 0..10 {
            let q = random_matrix(7, 100 + seed);
            let r = Reducer::new(IndexMode::Impact);
            let base = r.base_rollout(&q, 8).unwrap().final_dr();
            let sel = r.rollout_selection(&q, 8, None, None).unwrap().final_dr();
            assert!(sel <= base);
        }
    }

    #[test]
    fn default_horizon_values() {
        assert_eq!(default_horizon(1), 1);
        assert_eq!(default_horizon(8), 6);
        assert_eq!(default_horizon(16), 8);
        assert_eq!(default_horizon(10), 7);
    }

    #[test]
    fn policy_serde() {
        let p = Policy::BranchAndBound {
            rollout_depth: 2,
            update_depth: 4,
        };
        let s = serde_json::to_string(&p).unwrap();
        assert_eq!(serde_json::from_str::<Policy>(&s).unwrap(), p);
        let p: Policy = serde_json::from_str(r#"{"kind":"rollout_selection"}"#).unwrap();
        assert_eq!(p.label(), "rollout");
    }
}
