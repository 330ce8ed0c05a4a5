//! Admissible bounds on the dynamic range reachable after `T` entry changes.
//!
//! A single entry change can remove at most one distinct value from the value
//! set (and may add new ones). The value 0 can never be removed because the
//! structural zeros below the diagonal are not actions. Any value set reachable
//! in `T` changes therefore contains all but at most `T` of the current
//! values, 0 among the survivors. The maximum distance of the final set is at
//! least the smallest span of such a survivor set, and its minimum distance is
//! at most the largest minimum spacing of such a survivor set. Both are
//! computed exactly below.

use serde::{Deserialize, Serialize};

use crate::error::{QuboError, Result};
use crate::metrics::{GapStructure, ValueSet};
use crate::qubo::QuboMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundPair {
    /// Lower bound on the maximum distance after `T` changes.
    pub max_dist_lb: f64,
    /// Upper bound on the minimum distance after `T` changes.
    pub min_dist_ub: f64,
    /// `max(0, log2(max_dist_lb / min_dist_ub))`.
    pub dr_lb: f64,
}

fn zero_index(values: &[f64]) -> Result<usize> {
    if values.len() < 2 {
        return Err(QuboError::Degenerate);
    }
    values
        .iter()
        .position(|&v| v == 0.0)
        .ok_or_else(|| QuboError::InvalidParameter("value set must contain 0".into()))
}

/// Smallest span left after removing up to `t` values from the ends of the
/// sorted distinct `values`, never removing 0.
pub fn max_dist_lower_bound_values(values: &[f64], t: usize) -> Result<f64> {
    let z = zero_index(values)?;
    let top = values.len() - 1;
    let span = (0..=t)
        .map(|from_bottom| {
            let lo = values[from_bottom.min(z)];
            let hi = values[top.saturating_sub(t - from_bottom).max(z)];
            hi - lo
        })
        .fold(f64::INFINITY, f64::min);
    Ok(span)
}

/// Number of removals needed so that every neighbouring pair of the kept
/// values (0 always kept) is at least `d` apart. Greedy from 0 outwards keeps
/// the maximum number of values on each side.
fn removals_for_spacing(values: &[f64], z: usize, d: f64) -> usize {
    let mut removed = 0;
    let mut last = 0.0;
    for &v in &values[z + 1..] {
        if v - last >= d {
            last = v;
        } else {
            removed += 1;
        }
    }
    let mut last = 0.0;
    for &v in values[..z].iter().rev() {
        if last - v >= d {
            last = v;
        } else {
            removed += 1;
        }
    }
    removed
}

/// Largest minimum spacing achievable by removing up to `t` values other than 0.
///
/// Requires at least `t + 2` distinct values so that a gap survives.
pub fn min_dist_upper_bound_values(values: &[f64], t: usize) -> Result<f64> {
    let z = zero_index(values)?;
    if values.len() < t + 2 {
        return Err(QuboError::InsufficientValues {
            values: values.len(),
            changes: t,
        });
    }
    let min_gap = values
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::INFINITY, f64::min);
    let span = values[values.len() - 1] - values[0];
    let feasible = |d: f64| removals_for_spacing(values, z, d) <= t;
    if feasible(span) {
        return Ok(span);
    }
    // positive doubles are ordered like their bit patterns
    let (mut lo, mut hi) = (min_gap.to_bits(), span.to_bits());
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if feasible(f64::from_bits(mid)) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(f64::from_bits(lo))
}

pub fn bound_pair_values(values: &[f64], t: usize) -> Result<BoundPair> {
    let max_dist_lb = max_dist_lower_bound_values(values, t)?;
    let min_dist_ub = min_dist_upper_bound_values(values, t)?;
    let dr_lb = if max_dist_lb > 0.0 {
        (max_dist_lb / min_dist_ub).log2().max(0.0)
    } else {
        0.0
    };
    Ok(BoundPair {
        max_dist_lb,
        min_dist_ub,
        dr_lb,
    })
}

pub fn max_dist_lower_bound(q: &QuboMatrix, t: usize) -> Result<f64> {
    max_dist_lower_bound_values(ValueSet::from_matrix(q).values(), t)
}

pub fn min_dist_upper_bound(q: &QuboMatrix, t: usize) -> Result<f64> {
    min_dist_upper_bound_values(ValueSet::from_matrix(q).values(), t)
}

pub fn bound_pair(q: &QuboMatrix, t: usize) -> Result<BoundPair> {
    bound_pair_values(ValueSet::from_matrix(q).values(), t)
}

/// Lower bound on the dynamic range reachable from `q` within `t` changes.
pub fn dr_lower_bound(q: &QuboMatrix, t: usize) -> Result<f64> {
    bound_pair(q, t).map(|b| b.dr_lb)
}

/// Bound used for pruning: falls back to the trivial bound 0 when too few
/// distinct values remain for the spacing bound to exist.
pub(crate) fn pruning_bound(values: &ValueSet, t: usize) -> f64 {
    bound_pair_values(values.values(), t).map_or(0.0, |b| b.dr_lb)
}

/// One round of smallest-gap elimination: which value moves onto which.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MergeMove {
    /// Index of the value that moves.
    pub moved: usize,
    /// Index of the value it lands on (the other end of the smallest gap).
    pub onto: usize,
}

/// Picks the endpoint of the smallest gap to move: never 0, otherwise the one
/// whose other neighbouring gap is smaller, so that gap absorbs the removed
/// one. A boundary endpoint has no other gap and only moves when its partner
/// is 0.
pub fn merge_step(gaps: &GapStructure) -> Option<MergeMove> {
    let g = *gaps.rho.first()?;
    let left_other = if g > 0 { gaps.gaps[g - 1] } else { f64::INFINITY };
    let right_other = gaps.gaps.get(g + 1).copied().unwrap_or(f64::INFINITY);
    let left_movable = gaps.values[g] != 0.0;
    let right_movable = gaps.values[g + 1] != 0.0;
    let move_left = match (left_movable, right_movable) {
        (true, true) => left_other <= right_other,
        (true, false) => true,
        (false, true) => false,
        (false, false) => return None,
    };
    Some(if move_left {
        MergeMove { moved: g, onto: g + 1 }
    } else {
        MergeMove { moved: g + 1, onto: g }
    })
}

/// Smallest gap after `t` rounds of [`merge_step`].
///
/// This is the iterative gap-merge estimate. It follows one particular removal
/// sequence, so it never exceeds [`min_dist_upper_bound_values`] and can fall
/// below the true reachable minimum distance; it is not used for pruning.
pub fn gap_merge_estimate(values: &[f64], t: usize) -> Result<f64> {
    zero_index(values)?;
    let mut current = values.to_vec();
    for _ in 0..t {
        if current.len() < 3 {
            return Err(QuboError::InsufficientValues {
                values: values.len(),
                changes: t,
            });
        }
        let gaps = GapStructure::from_values(&current)?;
        let step = merge_step(&gaps).ok_or(QuboError::Degenerate)?;
        current.remove(step.moved);
    }
    Ok(GapStructure::from_values(&current)?.min_gap())
}
