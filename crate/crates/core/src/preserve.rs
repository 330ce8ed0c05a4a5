//! Optimum-preserving update intervals and the update-value heuristic.
//!
//! For an action `(k, l)` the assignments split into `A = {z : z_k z_l = 1}`,
//! whose energy moves by `w`, and `B`, whose energy is unchanged. The exact
//! provider enumerates all energies of a state once and answers every action
//! from that sweep.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{QuboError, Result};
use crate::metrics::ValueSet;
use crate::qubo::{solve_bits, Action, QuboMatrix, DEFAULT_EXHAUSTIVE_CAP};

/// Closed interval `[lower, upper]` with `lower <= 0 <= upper`; ends may be infinite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateInterval {
    pub lower: f64,
    pub upper: f64,
}

impl UpdateInterval {
    pub const ZERO: UpdateInterval = UpdateInterval {
        lower: 0.0,
        upper: 0.0,
    };

    pub fn new(lower: f64, upper: f64) -> Self {
        assert!(
            lower <= 0.0 && upper >= 0.0,
            "interval [{lower}, {upper}] must contain 0"
        );
        UpdateInterval { lower, upper }
    }

    pub fn contains(&self, w: f64) -> bool {
        self.lower <= w && w <= self.upper
    }
}

/// Which optimizers an update has to keep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InclusionMode {
    /// Every optimizer of the state stays an optimizer.
    #[default]
    Strict,
    /// One fixed optimizer stays an optimizer.
    SingleWitness,
}

/// Per-state answers of an interval provider.
pub trait StateBounds: Send + Sync {
    fn interval(&self, action: Action) -> UpdateInterval;

    /// Final check that writing `new_value` into `action` keeps the guarded
    /// optimizers. Heuristic providers without a checker accept everything.
    fn confirms(&self, _action: Action, _new_value: f64) -> bool {
        true
    }
}

/// Source of optimum-preserving intervals for arbitrary states.
pub trait IntervalProvider: Send + Sync {
    fn analyze(&self, q: &QuboMatrix) -> Result<Box<dyn StateBounds>>;
}

/// Enumeration-based provider producing maximal intervals.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactProvider {
    pub cap: usize,
    pub mode: InclusionMode,
    /// Tracked optimizer in single-witness mode (bit `i` = `z_i`).
    pub witness: Option<u64>,
}

impl Default for ExactProvider {
    fn default() -> Self {
        ExactProvider {
            cap: DEFAULT_EXHAUSTIVE_CAP,
            mode: InclusionMode::Strict,
            witness: None,
        }
    }
}

impl ExactProvider {
    pub fn strict() -> Self {
        Self::default()
    }

    /// Tracks the lowest optimizer (by bit pattern) of `root`.
    pub fn single_witness(root: &QuboMatrix) -> Result<Self> {
        let cap = DEFAULT_EXHAUSTIVE_CAP;
        let (_, opt) = solve_bits(root, cap)?;
        Ok(ExactProvider {
            cap,
            mode: InclusionMode::SingleWitness,
            witness: Some(opt[0]),
        })
    }

    pub fn landscape(&self, q: &QuboMatrix) -> Result<Landscape> {
        Landscape::new(q, self)
    }

    pub fn into_arc(self) -> Arc<dyn IntervalProvider> {
        Arc::new(self)
    }
}

impl IntervalProvider for ExactProvider {
    fn analyze(&self, q: &QuboMatrix) -> Result<Box<dyn StateBounds>> {
        Ok(Box::new(self.landscape(q)?))
    }
}

/// Indices of the lowest table energies, ascending; the rest are at least as high.
#[derive(Debug, Clone)]
struct SortedOrder {
    prefix: Vec<u32>,
    complete: bool,
}

const EAGER_PREFIX: usize = 2048;

fn by_energy(approx: &[f64]) -> impl Fn(&u32, &u32) -> std::cmp::Ordering + '_ {
    |&a, &b| {
        approx[a as usize]
            .total_cmp(&approx[b as usize])
            .then(a.cmp(&b))
    }
}

impl SortedOrder {
    fn new(approx: &[f64]) -> Self {
        let mut all: Vec<u32> = (0..approx.len() as u32).collect();
        let m = EAGER_PREFIX.min(all.len());
        let complete = m == all.len();
        if !complete {
            all.select_nth_unstable_by(m - 1, by_energy(approx));
            all.truncate(m);
        }
        all.sort_unstable_by(by_energy(approx));
        SortedOrder {
            prefix: all,
            complete,
        }
    }

    /// Assignments satisfying `pred` whose table energy is within `window`
    /// of the lowest such energy.
    fn near_min(&self, approx: &[f64], pred: impl Fn(u64) -> bool, window: f64) -> Vec<u64> {
        let bound = approx[*self.prefix.last().expect("nonempty table") as usize];
        if let Some(pos) = self.prefix.iter().position(|&z| pred(z as u64)) {
            let limit = approx[self.prefix[pos] as usize] + window;
            if self.complete || limit < bound {
                return self.prefix[pos..]
                    .iter()
                    .take_while(|&&z| approx[z as usize] <= limit)
                    .map(|&z| z as u64)
                    .filter(|&z| pred(z))
                    .collect();
            }
        }
        let low = (0..approx.len() as u64)
            .filter(|&z| pred(z))
            .map(|z| approx[z as usize])
            .fold(f64::INFINITY, f64::min);
        let limit = low + window;
        (0..approx.len() as u64)
            .filter(|&z| approx[z as usize] <= limit && pred(z))
            .collect()
    }
}

/// All energies of one state, sorted, with the exact optimizer set.
#[derive(Debug, Clone)]
pub struct Landscape {
    matrix: QuboMatrix,
    approx: Vec<f64>,
    order: SortedOrder,
    abs_sum: f64,
    tol_unit: f64,
    optimum: f64,
    optimizers: Vec<u64>,
    guarded: Vec<u64>,
}

impl Landscape {
    fn new(q: &QuboMatrix, provider: &ExactProvider) -> Result<Self> {
        let n = q.n();
        if n > provider.cap.min(31) {
            return Err(QuboError::CapExceeded {
                n,
                cap: provider.cap.min(31),
            });
        }
        let approx = q.energy_table();
        let abs_sum = q.abs_sum();
        let tol = q.scan_tolerance();
        let tol_unit = if abs_sum > 0.0 { tol / abs_sum } else { 0.0 };
        let order = SortedOrder::new(&approx);
        let mut optimum = f64::INFINITY;
        let mut exact = Vec::new();
        for z in order.near_min(&approx, |_| true, 2.0 * tol) {
            let e = q.energy_bits(z);
            optimum = optimum.min(e);
            exact.push((z, e));
        }
        let mut optimizers: Vec<u64> = exact
            .into_iter()
            .filter(|&(_, e)| e == optimum)
            .map(|(z, _)| z)
            .collect();
        optimizers.sort_unstable();
        let guarded = match provider.mode {
            InclusionMode::Strict => optimizers.clone(),
            InclusionMode::SingleWitness => {
                let w = provider.witness.unwrap_or(optimizers[0]);
                if optimizers.binary_search(&w).is_err() {
                    return Err(QuboError::InvalidParameter(format!(
                        "witness {w:#b} is not an optimizer of this state"
                    )));
                }
                vec![w]
            }
        };
        Ok(Landscape {
            matrix: q.clone(),
            approx,
            order,
            abs_sum,
            tol_unit,
            optimum,
            optimizers,
            guarded,
        })
    }

    pub fn optimum(&self) -> f64 {
        self.optimum
    }

    /// Optimizer bit patterns, ascending.
    pub fn optimizers(&self) -> &[u64] {
        &self.optimizers
    }

    fn tol(&self, extra: f64) -> f64 {
        self.tol_unit * (self.abs_sum + extra.abs())
    }

    /// Minimum of `energy` over assignments satisfying `pred`, where `energy`
    /// differs from the table by a uniform shift plus at most `window / 2`.
    fn exact_min_where(
        &self,
        pred: impl Fn(u64) -> bool,
        energy: impl Fn(u64) -> f64,
        window: f64,
    ) -> f64 {
        self.order
            .near_min(&self.approx, pred, window)
            .into_iter()
            .map(energy)
            .fold(f64::INFINITY, f64::min)
    }

    /// Exact minimum energy on one side of the split by `action`.
    fn side_min(&self, action: Action, inside: bool) -> f64 {
        self.exact_min_where(
            |z| action.active(z) == inside,
            |z| self.matrix.energy_bits(z),
            2.0 * self.tol(0.0),
        )
    }

    /// Side of the split holding the guarded optimizers; `None` when they straddle it.
    fn guarded_side(&self, action: Action) -> Option<bool> {
        let inside = self.guarded.iter().filter(|&&z| action.active(z)).count();
        if inside == self.guarded.len() {
            Some(true)
        } else if inside == 0 {
            Some(false)
        } else {
            None
        }
    }
}

impl StateBounds for Landscape {
    fn interval(&self, action: Action) -> UpdateInterval {
        match self.guarded_side(action) {
            None => UpdateInterval::ZERO,
            Some(true) => {
                let other = self.side_min(action, false);
                UpdateInterval::new(f64::NEG_INFINITY, (other - self.optimum).max(0.0))
            }
            Some(false) => {
                let other = self.side_min(action, true);
                UpdateInterval::new((self.optimum - other).min(0.0), f64::INFINITY)
            }
        }
    }

    fn confirms(&self, action: Action, new_value: f64) -> bool {
        let old = self.matrix.get(action.k, action.l);
        if new_value == old {
            return true;
        }
        if self.guarded_side(action).is_none() {
            return false;
        }
        let replace = Some((action, new_value));
        let energy = |z: u64| self.matrix.energy_bits_with(z, replace);
        let reference = energy(self.guarded[0]);
        if self.guarded[1..].iter().any(|&z| energy(z) != reference) {
            return false;
        }
        // only the energies with z_k z_l = 1 move, all by the same amount
        let window = 4.0 * self.tol(new_value - old);
        let moved = self.exact_min_where(|z| action.active(z), energy, window);
        moved >= reference && self.side_min(action, false) >= reference
    }
}

/// Maximal interval of additive changes to entry `action` keeping every optimizer of `q`.
pub fn preserving_interval(q: &QuboMatrix, action: Action) -> Result<UpdateInterval> {
    q.check_action(action)?;
    Ok(ExactProvider::strict().landscape(q)?.interval(action))
}

/// A scored update value for one action.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateCandidate {
    pub w: f64,
    pub new_value: f64,
    /// Dynamic range after the update; 0 when a single value remains.
    pub dr: f64,
}

/// `w` with `x + w == v` in floating point whenever such a nearby `w` exists.
pub(crate) fn snap_delta(x: f64, v: f64) -> f64 {
    let w = v - x;
    if x + w == v {
        return w;
    }
    let (mut up, mut down) = (w, w);
    for _ in 0..4 {
        up = up.next_up();
        down = down.next_down();
        if x + up == v {
            return up;
        }
        if x + down == v {
            return down;
        }
    }
    w
}

/// Candidate updates for `action` inside `interval`, best first.
///
/// Candidates are 0, every move landing exactly on another distinct value,
/// and the finite interval endpoints. Ordering: smallest resulting dynamic
/// range, then `w = 0`, then smallest `|w|`.
pub fn rank_updates(
    q: &QuboMatrix,
    values: &ValueSet,
    action: Action,
    interval: UpdateInterval,
) -> Vec<UpdateCandidate> {
    let x = q.get(action.k, action.l);
    let mut ws = vec![0.0];
    ws.extend(
        values
            .values()
            .iter()
            .filter(|&&v| v != x)
            .map(|&v| snap_delta(x, v))
            .filter(|&w| interval.contains(w)),
    );
    ws.extend(
        [interval.lower, interval.upper]
            .into_iter()
            .filter(|w| w.is_finite() && *w != 0.0),
    );
    let mut out: Vec<UpdateCandidate> = Vec::with_capacity(ws.len());
    for w in ws {
        let new_value = x + w + 0.0;
        if !new_value.is_finite() || out.iter().any(|c| c.new_value == new_value) {
            continue;
        }
        let dr = values
            .dynamic_range_after_replace(x, new_value)
            .unwrap_or(0.0);
        out.push(UpdateCandidate { w, new_value, dr });
    }
    out.sort_by(|a, b| {
        a.dr.total_cmp(&b.dr)
            .then((a.w != 0.0).cmp(&(b.w != 0.0)))
            .then(a.w.abs().total_cmp(&b.w.abs()))
            .then(a.w.total_cmp(&b.w))
    });
    out
}

/// DR-minimising update value for `action` within `interval`.
pub fn select_update(q: &QuboMatrix, action: Action, interval: UpdateInterval) -> f64 {
    let values = ValueSet::from_matrix(q);
    rank_updates(q, &values, action, interval)
        .first()
        .map_or(0.0, |c| c.w)
}
