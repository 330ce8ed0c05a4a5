//! Dynamic range, coefficient ratio and the sorted-value machinery shared by
//! the bounds and the search.
//!
//! All quantities are computed over the set of distinct entry values of the
//! full `n x n` matrix, so the structural zeros below the diagonal always
//! contribute the value `0`.

use serde::{Deserialize, Serialize};

use crate::error::{QuboError, Result};
use crate::qubo::QuboMatrix;

/// Distinct entry values with multiplicities, sorted ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueSet {
    values: Vec<f64>,
    counts: Vec<usize>,
}

/// Span and smallest neighbour gap of a sorted distinct-value sequence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Spread {
    pub span: f64,
    pub min_gap: f64,
}

impl Spread {
    pub fn dynamic_range(&self) -> f64 {
        (self.span / self.min_gap).log2()
    }
}

fn spread_of(iter: impl Iterator<Item = f64>) -> Option<Spread> {
    let mut first = None;
    let mut prev: Option<f64> = None;
    let mut min_gap = f64::INFINITY;
    for v in iter {
        if let Some(p) = prev {
            min_gap = min_gap.min(v - p);
        } else {
            first = Some(v);
        }
        prev = Some(v);
    }
    match (first, prev) {
        (Some(lo), Some(hi)) if min_gap.is_finite() => Some(Spread {
            span: hi - lo,
            min_gap,
        }),
        _ => None,
    }
}

impl ValueSet {
    pub fn from_matrix(q: &QuboMatrix) -> Self {
        let mut raw: Vec<f64> = q.raw_values().iter().map(|v| v + 0.0).collect();
        // the zero is structural even for n = 1
        if q.n() == 1 {
            raw.push(0.0);
        }
        Self::from_raw(raw)
    }

    /// Builds a value set from arbitrary finite values.
    pub fn from_raw(mut raw: Vec<f64>) -> Self {
        raw.sort_unstable_by(f64::total_cmp);
        let mut values: Vec<f64> = Vec::with_capacity(raw.len());
        let mut counts: Vec<usize> = Vec::with_capacity(raw.len());
        for v in raw {
            match values.last() {
                Some(&last) if last == v => *counts.last_mut().unwrap() += 1,
                _ => {
                    values.push(v);
                    counts.push(1);
                }
            }
        }
        ValueSet { values, counts }
    }

    /// Sorted distinct values.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn count_of(&self, v: f64) -> usize {
        self.position(v).map_or(0, |i| self.counts[i])
    }

    pub fn position(&self, v: f64) -> Option<usize> {
        self.values.binary_search_by(|x| x.total_cmp(&(v + 0.0))).ok()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub(crate) fn spread(&self) -> Option<Spread> {
        spread_of(self.values.iter().copied())
    }

    pub fn dynamic_range(&self) -> Option<f64> {
        self.spread().map(|s| s.dynamic_range())
    }

    /// Spread after one occurrence of `old` is replaced by `new`.
    pub(crate) fn spread_after_replace(&self, old: f64, new: f64) -> Option<Spread> {
        let new = new + 0.0;
        if old == new {
            return self.spread();
        }
        let drop_old = self.count_of(old) == 1;
        let base = self
            .values
            .iter()
            .copied()
            .filter(move |&v| !(drop_old && v == old));
        let merged = MergeOne {
            base,
            extra: self.position(new).is_none().then_some(new),
            pending: None,
        };
        spread_of(merged)
    }

    /// Dynamic range after one occurrence of `old` is replaced by `new`;
    /// `None` when fewer than two distinct values remain.
    pub fn dynamic_range_after_replace(&self, old: f64, new: f64) -> Option<f64> {
        self.spread_after_replace(old, new)
            .map(|s| s.dynamic_range())
    }
}

/// Inserts one value into an ascending stream.
struct MergeOne<I: Iterator<Item = f64>> {
    base: I,
    extra: Option<f64>,
    pending: Option<f64>,
}

impl<I: Iterator<Item = f64>> Iterator for MergeOne<I> {
    type Item = f64;
    fn next(&mut self) -> Option<f64> {
        let next = self.pending.take().or_else(|| self.base.next());
        match (next, self.extra) {
            (Some(v), Some(x)) if x < v => {
                self.extra = None;
                self.pending = Some(v);
                Some(x)
            }
            (Some(v), _) => Some(v),
            (None, x) => {
                self.extra = None;
                x
            }
        }
    }
}

/// Sorted view of a matrix's values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueView {
    /// Distinct values, ascending; always contains 0.
    pub distinct_values: Vec<f64>,
    /// All `n^2` entries in nondecreasing order.
    pub sorted_entries: Vec<f64>,
}

pub fn value_view(q: &QuboMatrix) -> ValueView {
    let mut sorted_entries: Vec<f64> = q.raw_values().iter().map(|v| v + 0.0).collect();
    sorted_entries.sort_unstable_by(f64::total_cmp);
    let distinct_values = ValueSet::from_matrix(q).values;
    ValueView {
        distinct_values,
        sorted_entries,
    }
}

/// Consecutive differences of the sorted distinct values and their ordering.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapStructure {
    pub values: Vec<f64>,
    /// `gaps[i] = values[i + 1] - values[i]`, all positive.
    pub gaps: Vec<f64>,
    /// Gap indices ordered by size, ties broken by lower index.
    pub rho: Vec<usize>,
    /// Index of 0 in `values`.
    pub zero_position: usize,
}

impl GapStructure {
    pub fn from_values(values: &[f64]) -> Result<Self> {
        if values.len() < 2 {
            return Err(QuboError::Degenerate);
        }
        let gaps: Vec<f64> = values.windows(2).map(|w| w[1] - w[0]).collect();
        let mut rho: Vec<usize> = (0..gaps.len()).collect();
        rho.sort_by(|&a, &b| gaps[a].total_cmp(&gaps[b]).then(a.cmp(&b)));
        let zero_position = values
            .iter()
            .position(|&v| v == 0.0)
            .ok_or_else(|| QuboError::InvalidParameter("value set must contain 0".into()))?;
        Ok(GapStructure {
            values: values.to_vec(),
            gaps,
            rho,
            zero_position,
        })
    }

    pub fn min_gap(&self) -> f64 {
        self.gaps[self.rho[0]]
    }
}

pub fn gap_structure(q: &QuboMatrix) -> Result<GapStructure> {
    GapStructure::from_values(ValueSet::from_matrix(q).values())
}

/// `log2(maxD / minD)` over the distinct values of `q`.
pub fn dynamic_range(q: &QuboMatrix) -> Result<f64> {
    ValueSet::from_matrix(q)
        .dynamic_range()
        .ok_or(QuboError::Degenerate)
}

/// Dynamic range of an arbitrary value set (duplicates ignored).
pub fn dynamic_range_of_values(values: &[f64]) -> Result<f64> {
    ValueSet::from_raw(values.to_vec())
        .dynamic_range()
        .ok_or(QuboError::Degenerate)
}

/// Largest entry magnitude over the smallest nonzero entry magnitude.
pub fn max_coeff_ratio(q: &QuboMatrix) -> Result<f64> {
    let (lo, hi) = q
        .raw_values()
        .iter()
        .filter(|v| **v != 0.0)
        .map(|v| v.abs())
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), a| (lo.min(a), hi.max(a)));
    if hi == 0.0 {
        return Err(QuboError::AllZero);
    }
    Ok(hi / lo)
}

/// Number of bits needed to represent the matrix: `ceil(DR)`.
pub fn bits_required(q: &QuboMatrix) -> Result<u32> {
    Ok(bits_for_range(dynamic_range(q)?))
}

pub fn bits_for_range(dr: f64) -> u32 {
    dr.ceil().max(0.0) as u32
}
