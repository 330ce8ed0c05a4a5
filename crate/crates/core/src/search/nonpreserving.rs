use crate::bounds::merge_step;
use crate::error::Result;
use crate::metrics::{GapStructure, ValueSet};
use crate::preserve::snap_delta;
use crate::qubo::{Action, QuboMatrix};

use super::{dr_or_zero, ReductionTrace, TraceStep};

/// Value index to drop together with the index it lands on.
#[derive(Debug, Clone, Copy)]
struct Collapse {
    moved: usize,
    onto: usize,
    dr: f64,
}

fn collapse(values: &[f64], moved: usize, onto: usize) -> Collapse {
    let rest = values
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != moved)
        .map(|(_, &v)| v);
    let dr = ValueSet::from_raw(rest.collect())
        .dynamic_range()
        .unwrap_or(0.0);
    Collapse { moved, onto, dr }
}

/// Extreme value whose removal leaves the smaller span; 0 never moves.
fn extreme_move(values: &[f64], zero: usize) -> Option<Collapse> {
    let top = values.len() - 1;
    let low = (zero > 0).then(|| (values[top] - values[1], 0, 1));
    let high = (zero < top).then(|| (values[top - 1] - values[0], top, top - 1));
    let (_, moved, onto) = match (low, high) {
        (Some(a), Some(b)) => {
            if b.0 < a.0 {
                b
            } else {
                a
            }
        }
        (a, b) => a.or(b)?,
    };
    Some(collapse(values, moved, onto))
}

/// Heuristic reduction ignoring optimizers: each round collapses one distinct
/// value onto its neighbour, either an extreme value or an end of the
/// smallest gap, whichever leaves the smaller dynamic range. Every entry
/// holding the collapsed value moves, one trace step per entry.
pub fn nonpreserving_trace(q: &QuboMatrix, rounds: usize) -> Result<ReductionTrace> {
    let mut trace = ReductionTrace::new(q.clone());
    let mut state = q.clone();
    for _ in 0..rounds {
        let values = ValueSet::from_matrix(&state).values().to_vec();
        if values.len() < 3 {
            break;
        }
        let gaps = GapStructure::from_values(&values)?;
        let extreme = extreme_move(&values, gaps.zero_position);
        let merge = merge_step(&gaps).map(|m| collapse(&values, m.moved, m.onto));
        let choice = match (extreme, merge) {
            (Some(e), Some(m)) => {
                if m.dr < e.dr {
                    m
                } else {
                    e
                }
            }
            (e, m) => match e.or(m) {
                Some(c) => c,
                None => break,
            },
        };
        let (from, to) = (values[choice.moved], values[choice.onto]);
        let holders: Vec<Action> = state
            .upper_entries()
            .filter(|&(_, _, v)| v == from)
            .map(|(k, l, _)| Action { k, l })
            .collect();
        for a in holders {
            let w = snap_delta(from, to);
            state = state.apply_update(a, w)?;
            trace.steps.push(TraceStep {
                k: a.k,
                l: a.l,
                w,
                dr: dr_or_zero(&state),
            });
        }
    }
    Ok(trace)
}

/// Matrix after `rounds` rounds of [`nonpreserving_trace`].
pub fn nonpreserving_reduce(q: &QuboMatrix, rounds: usize) -> Result<QuboMatrix> {
    nonpreserving_trace(q, rounds)?.replay()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qubo::optimum_included;
    use crate::qubo::tests::example_q;

    #[test]
    fn zero_rounds_is_identity() {
        let q = example_q();
        assert_eq!(nonpreserving_reduce(&q, 0).unwrap(), q);
    }

    #[test]
    fn one_round_shrinks_example() {
        let q = example_q();
        let out = nonpreserving_reduce(&q, 1).unwrap();
        assert!(dr_or_zero(&out) < dr_or_zero(&q));
        // -1000 collapses onto -1.5
        assert_eq!(out.get(1, 1), -1.5);
    }

    #[test]
    fn can_break_optimizers() {
        let q = QuboMatrix::from_dense(&[vec![1.0, -3.0], vec![0.0, 1.0]]).unwrap();
        let out = nonpreserving_reduce(&q, 1).unwrap();
        assert!(!optimum_included(&q, &out).unwrap());
    }

    #[test]
    fn shared_values_move_together() {
        let q = QuboMatrix::from_dense(&[
            vec![-50.0, 1.0, 2.0],
            vec![0.0, -50.0, 2.5],
            vec![0.0, 0.0, 3.0],
        ])
        .unwrap();
        let t = nonpreserving_trace(&q, 1).unwrap();
        assert_eq!(t.len(), 2);
        let out = t.replay().unwrap();
        assert_eq!(out.get(0, 0), out.get(1, 1));
        assert!(t.drs_consistent().unwrap());
    }
}
