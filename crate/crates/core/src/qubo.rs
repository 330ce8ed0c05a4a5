//! Dense upper-triangular QUBO matrices, energies and exhaustive solving.
//!
//! Energies are evaluated along one canonical summation order (row-major over
//! the support of the assignment). Every optimality decision in the crate is
//! taken on canonical energies, so two callers comparing the same pair of
//! assignments always agree bit for bit. Fast scans (Gray-code walks) only
//! pre-select candidates inside a rigorous error window before the canonical
//! re-evaluation.

use serde::{Deserialize, Serialize};

use crate::error::{QuboError, Result};

/// Largest dimension accepted by exhaustive enumeration unless overridden.
pub const DEFAULT_EXHAUSTIVE_CAP: usize = 24;

/// Steps between full re-evaluations during a Gray-code walk.
const RESYNC_PERIOD: u64 = 64;

#[inline]
fn normalize_zero(v: f64) -> f64 {
    // maps -0.0 to +0.0 so total ordering and equality agree
    v + 0.0
}

/// Upper-triangular real matrix defining the energy `z^T Q z`.
///
/// Serialises as `{"n": .., "entries": [[i, j, v], ..]}` listing the nonzero
/// upper-triangular entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "SparseForm", try_from = "SparseForm")]
pub struct QuboMatrix {
    n: usize,
    data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct SparseForm {
    n: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl From<QuboMatrix> for SparseForm {
    fn from(q: QuboMatrix) -> Self {
        let entries = q.upper_entries().filter(|e| e.2 != 0.0).collect();
        SparseForm { n: q.n, entries }
    }
}

impl TryFrom<SparseForm> for QuboMatrix {
    type Error = QuboError;
    fn try_from(s: SparseForm) -> Result<Self> {
        QuboMatrix::from_entries(s.n, s.entries)
    }
}

/// Index pair `(k, l)` with `k <= l` naming one upper-triangular entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Action {
    pub k: usize,
    pub l: usize,
}

impl Action {
    pub fn new(k: usize, l: usize) -> Result<Self> {
        if k > l {
            return Err(QuboError::LowerTriangular { i: k, j: l });
        }
        Ok(Action { k, l })
    }

    pub(crate) fn mask(&self) -> u64 {
        (1u64 << self.k) | (1u64 << self.l)
    }

    /// Whether `z_k z_l = 1` for the assignment encoded in `bits`.
    #[inline]
    pub(crate) fn active(&self, bits: u64) -> bool {
        let m = self.mask();
        bits & m == m
    }
}

impl std::fmt::Display for Action {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}, {})", self.k, self.l)
    }
}

/// Binary vector `z`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Assignment(pub Vec<bool>);

impl Assignment {
    pub fn zeros(n: usize) -> Self {
        Assignment(vec![false; n])
    }

    pub fn from_bits(bits: u64, n: usize) -> Self {
        Assignment((0..n).map(|i| bits >> i & 1 == 1).collect())
    }

    /// Bit `i` of the result is `z_i`. Only valid for `len() <= 64`.
    pub fn to_bits(&self) -> u64 {
        self.0
            .iter()
            .enumerate()
            .fold(0u64, |acc, (i, &b)| if b { acc | 1 << i } else { acc })
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl From<Vec<u8>> for Assignment {
    fn from(v: Vec<u8>) -> Self {
        Assignment(v.into_iter().map(|b| b != 0).collect())
    }
}

/// Optimum energy and the complete optimizer set of a QUBO instance.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub optimum_energy: f64,
    /// Sorted by bit pattern (bit `i` = `z_i`).
    pub optimizers: Vec<Assignment>,
}

impl QuboMatrix {
    pub fn zeros(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(QuboError::EmptyDimension);
        }
        Ok(QuboMatrix {
            n,
            data: vec![0.0; n * n],
        })
    }

    /// Builds a matrix from dense rows; entries below the diagonal must be zero.
    pub fn from_dense(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let mut q = QuboMatrix::zeros(n)?;
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(QuboError::DimensionMismatch {
                    expected: n,
                    actual: row.len(),
                });
            }
            for (j, &v) in row.iter().enumerate() {
                if !v.is_finite() {
                    return Err(QuboError::NonFinite { i, j, value: v });
                }
                if i > j {
                    if v != 0.0 {
                        return Err(QuboError::LowerTriangular { i, j });
                    }
                    continue;
                }
                q.data[i * n + j] = normalize_zero(v);
            }
        }
        Ok(q)
    }

    /// Builds a matrix from `(i, j, value)` triples with `i <= j`; omitted entries are zero.
    pub fn from_entries<I>(n: usize, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        let mut q = QuboMatrix::zeros(n)?;
        let mut seen = vec![false; n * n];
        for (i, j, v) in entries {
            if i >= n || j >= n {
                return Err(QuboError::IndexOutOfRange { i, j, n });
            }
            if i > j {
                return Err(QuboError::LowerTriangular { i, j });
            }
            if !v.is_finite() {
                return Err(QuboError::NonFinite { i, j, value: v });
            }
            if std::mem::replace(&mut seen[i * n + j], true) {
                return Err(QuboError::DuplicateEntry { i, j });
            }
            q.data[i * n + j] = normalize_zero(v);
        }
        Ok(q)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    /// All `n^2` stored values, row-major, including the structural zeros below the diagonal.
    pub fn raw_values(&self) -> &[f64] {
        &self.data
    }

    /// Upper-triangular entries `(i, j, Q_ij)` in row-major order, zeros included.
    pub fn upper_entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let n = self.n;
        (0..n).flat_map(move |i| (i..n).map(move |j| (i, j, self.data[i * n + j])))
    }

    /// Every upper-triangular action in lexicographic order.
    pub fn actions(&self) -> impl Iterator<Item = Action> + '_ {
        let n = self.n;
        (0..n).flat_map(move |k| (k..n).map(move |l| Action { k, l }))
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn abs_sum(&self) -> f64 {
        self.data.iter().map(|v| v.abs()).sum()
    }

    pub fn check_action(&self, a: Action) -> Result<()> {
        if a.k > a.l {
            return Err(QuboError::LowerTriangular { i: a.k, j: a.l });
        }
        if a.l >= self.n {
            return Err(QuboError::IndexOutOfRange {
                i: a.k,
                j: a.l,
                n: self.n,
            });
        }
        Ok(())
    }

    /// `Q + w e_k e_l^T`; the receiver is left untouched.
    pub fn apply_update(&self, a: Action, w: f64) -> Result<QuboMatrix> {
        self.check_action(a)?;
        if !w.is_finite() {
            return Err(QuboError::NonFiniteUpdate(w));
        }
        let value = self.get(a.k, a.l) + w;
        if !value.is_finite() {
            return Err(QuboError::NonFinite {
                i: a.k,
                j: a.l,
                value,
            });
        }
        Ok(self.with_entry(a, value))
    }

    /// Copy with entry `a` overwritten by `value`.
    pub(crate) fn with_entry(&self, a: Action, value: f64) -> QuboMatrix {
        let mut q = self.clone();
        q.data[a.k * self.n + a.l] = normalize_zero(value);
        q
    }

    /// Multiplies every entry by `c`.
    pub fn scaled(&self, c: f64) -> Result<QuboMatrix> {
        let rows: Vec<Vec<f64>> = (0..self.n)
            .map(|i| (0..self.n).map(|j| self.get(i, j) * c).collect())
            .collect();
        QuboMatrix::from_dense(&rows)
    }

    pub fn energy(&self, z: &Assignment) -> Result<f64> {
        if z.len() != self.n {
            return Err(QuboError::DimensionMismatch {
                expected: self.n,
                actual: z.len(),
            });
        }
        let mut acc = 0.0;
        for i in (0..self.n).filter(|&i| z.0[i]) {
            let row = &self.data[i * self.n..(i + 1) * self.n];
            for j in (i..self.n).filter(|&j| z.0[j]) {
                acc += row[j];
            }
        }
        Ok(acc)
    }

    /// Canonical energy of the assignment encoded in `bits` (requires `n <= 64`).
    #[inline]
    pub(crate) fn energy_bits(&self, bits: u64) -> f64 {
        self.energy_bits_with(bits, None)
    }

    /// Canonical energy with one entry replaced, without materialising the matrix.
    pub(crate) fn energy_bits_with(&self, bits: u64, replace: Option<(Action, f64)>) -> f64 {
        let n = self.n;
        let mut acc = 0.0;
        let mut rest = bits;
        while rest != 0 {
            let i = rest.trailing_zeros() as usize;
            rest &= rest - 1;
            let row = &self.data[i * n..(i + 1) * n];
            let mut cols = bits >> i << i;
            while cols != 0 {
                let j = cols.trailing_zeros() as usize;
                cols &= cols - 1;
                let v = match replace {
                    Some((a, v)) if a.k == i && a.l == j => v,
                    _ => row[j],
                };
                acc += v;
            }
        }
        acc
    }

    /// Upper bound on the gap between Gray-walk energies and canonical energies.
    pub(crate) fn scan_tolerance(&self) -> f64 {
        let n = self.n as f64;
        let steps = RESYNC_PERIOD as f64;
        (2.0 * steps * (n + 2.0) + 2.0 * n * n + 16.0) * 4.0 * f64::EPSILON * self.abs_sum()
    }

    /// Visits every assignment in Gray-code order with an approximate energy
    /// whose error is bounded by [`scan_tolerance`](Self::scan_tolerance).
    pub(crate) fn gray_walk(&self, mut visit: impl FnMut(u64, f64)) {
        let n = self.n;
        let diag: Vec<f64> = (0..n).map(|i| self.get(i, i)).collect();
        let coupling = |i: usize, j: usize| {
            if i < j {
                self.get(i, j)
            } else if j < i {
                self.get(j, i)
            } else {
                0.0
            }
        };
        let sym: Vec<f64> = (0..n * n).map(|x| coupling(x / n, x % n)).collect();
        let mut field = diag.clone();
        let mut z = 0u64;
        let mut e = 0.0;
        visit(0, 0.0);
        let total = 1u64 << n;
        for step in 1..total {
            let b = step.trailing_zeros() as usize;
            let on = z >> b & 1 == 0;
            e += if on { field[b] } else { -field[b] };
            z ^= 1 << b;
            let col = &sym[b * n..(b + 1) * n];
            if on {
                field.iter_mut().zip(col).for_each(|(f, s)| *f += s);
            } else {
                field.iter_mut().zip(col).for_each(|(f, s)| *f -= s);
            }
            if step % RESYNC_PERIOD == 0 {
                e = self.energy_bits(z);
                for (j, f) in field.iter_mut().enumerate() {
                    *f = diag[j]
                        + (0..n)
                            .filter(|&i| z >> i & 1 == 1)
                            .map(|i| sym[j * n + i])
                            .sum::<f64>();
                }
            }
            visit(z, e);
        }
    }

    /// Approximate energies of all `2^n` assignments indexed by bit pattern.
    pub(crate) fn energy_table(&self) -> Vec<f64> {
        let mut table = vec![0.0; 1usize << self.n];
        self.gray_walk(|z, e| table[z as usize] = e);
        table
    }
}

/// Exact optimum and optimizer bit patterns (sorted).
pub(crate) fn solve_bits(q: &QuboMatrix, cap: usize) -> Result<(f64, Vec<u64>)> {
    let n = q.n();
    if n > cap.min(63) {
        return Err(QuboError::CapExceeded { n, cap });
    }
    let window = 2.0 * q.scan_tolerance();
    let mut best = f64::INFINITY;
    let mut pool: Vec<u64> = Vec::new();
    let mut pool_energy: Vec<f64> = Vec::new();
    q.gray_walk(|z, e| {
        if e < best {
            best = e;
            let limit = best + window;
            let mut keep = 0;
            for idx in 0..pool.len() {
                if pool_energy[idx] <= limit {
                    pool[keep] = pool[idx];
                    pool_energy[keep] = pool_energy[idx];
                    keep += 1;
                }
            }
            pool.truncate(keep);
            pool_energy.truncate(keep);
        }
        if e <= best + window {
            pool.push(z);
            pool_energy.push(e);
        }
    });
    let exact: Vec<(u64, f64)> = pool.iter().map(|&z| (z, q.energy_bits(z))).collect();
    let optimum = exact
        .iter()
        .map(|&(_, e)| e)
        .fold(f64::INFINITY, f64::min);
    let mut optimizers: Vec<u64> = exact
        .into_iter()
        .filter(|&(_, e)| e == optimum)
        .map(|(z, _)| z)
        .collect();
    optimizers.sort_unstable();
    Ok((optimum, optimizers))
}

/// Exhaustive minimisation over all `2^n` assignments with the default cap.
pub fn solve_exhaustive(q: &QuboMatrix) -> Result<SolveResult> {
    solve_exhaustive_with_cap(q, DEFAULT_EXHAUSTIVE_CAP)
}

pub fn solve_exhaustive_with_cap(q: &QuboMatrix, cap: usize) -> Result<SolveResult> {
    let (optimum_energy, bits) = solve_bits(q, cap)?;
    Ok(SolveResult {
        optimum_energy,
        optimizers: bits
            .into_iter()
            .map(|z| Assignment::from_bits(z, q.n()))
            .collect(),
    })
}

/// Whether every optimizer of `q` is also an optimizer of `other`.
pub fn optimum_included(q: &QuboMatrix, other: &QuboMatrix) -> Result<bool> {
    optimum_included_with_cap(q, other, DEFAULT_EXHAUSTIVE_CAP)
}

pub fn optimum_included_with_cap(q: &QuboMatrix, other: &QuboMatrix, cap: usize) -> Result<bool> {
    if q.n() != other.n() {
        return Err(QuboError::DimensionMismatch {
            expected: q.n(),
            actual: other.n(),
        });
    }
    let (_, a) = solve_bits(q, cap)?;
    let (_, b) = solve_bits(other, cap)?;
    Ok(a.iter().all(|z| b.binary_search(z).is_ok()))
}
