//! Simulated annealing and solution-quality metrics.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{QuboError, Result};
use crate::qubo::{Assignment, QuboMatrix};

mod experiment;

pub use experiment::{
    run_experiment, write_csv, write_json, ExperimentConfig, ExperimentReport, PolicyConfig,
    ReportRow, SamplerConfig, SuiteConfig,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnnealParams {
    pub n_samples: usize,
    pub sweeps: usize,
    /// Inverse temperatures at the first and the last sweep.
    pub beta_range: (f64, f64),
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub assignment: Assignment,
    pub energy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSet {
    pub samples: Vec<Sample>,
    pub params: AnnealParams,
}

impl SampleSet {
    /// Same assignments with energies taken under `q`.
    pub fn rescored(&self, q: &QuboMatrix) -> Result<SampleSet> {
        let samples = self
            .samples
            .iter()
            .map(|s| {
                Ok(Sample {
                    assignment: s.assignment.clone(),
                    energy: q.energy(&s.assignment)?,
                })
            })
            .collect::<Result<_>>()?;
        Ok(SampleSet {
            samples,
            params: self.params,
        })
    }

    pub fn energies(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.energy).collect()
    }

    /// Number of samples whose energy equals `optimum`.
    pub fn count_optimal(&self, optimum: f64) -> usize {
        self.samples.iter().filter(|s| s.energy == optimum).count()
    }
}

/// Symmetric couplings `S_ij = Q_ij + Q_ji` (zero diagonal) as dense rows.
fn couplings(q: &QuboMatrix) -> Vec<f64> {
    let n = q.n();
    let mut s = vec![0.0; n * n];
    for (i, j, v) in q.upper_entries().filter(|&(i, j, _)| i < j) {
        s[i * n + j] = v;
        s[j * n + i] = v;
    }
    s
}

/// Inverse temperatures making the largest single-flip change accepted with
/// probability 1/2 at the start and the smallest coefficient accepted with
/// probability 1/100 at the end.
pub fn default_beta_range(q: &QuboMatrix) -> (f64, f64) {
    let n = q.n();
    let s = couplings(q);
    let max_delta = (0..n)
        .map(|i| q.get(i, i).abs() + s[i * n..(i + 1) * n].iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let min_coeff = q
        .raw_values()
        .iter()
        .filter(|v| **v != 0.0)
        .map(|v| v.abs())
        .fold(f64::INFINITY, f64::min);
    if max_delta == 0.0 {
        return (1.0, 1.0);
    }
    (2f64.ln() / max_delta, 100f64.ln() / min_coeff)
}

fn anneal_chain(q: &QuboMatrix, s: &[f64], betas: &[f64], rng: &mut ChaCha8Rng) -> Vec<bool> {
    let n = q.n();
    let mut z: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.5)).collect();
    // field[i] = sum_j S_ij z_j
    let mut field = vec![0.0; n];
    for i in 0..n {
        field[i] = (0..n).filter(|&j| z[j]).map(|j| s[i * n + j]).sum();
    }
    for &beta in betas {
        for i in 0..n {
            let local = q.get(i, i) + field[i];
            let delta = if z[i] { -local } else { local };
            let accept = delta <= 0.0 || rng.gen::<f64>() < (-beta * delta).exp();
            if accept {
                z[i] = !z[i];
                let sign = if z[i] { 1.0 } else { -1.0 };
                let row = &s[i * n..(i + 1) * n];
                for (f, c) in field.iter_mut().zip(row) {
                    *f += sign * c;
                }
            }
        }
    }
    z
}

/// Independent single-flip Metropolis chains with a geometric schedule.
///
/// Chain `c` draws from stream `c` of a generator seeded with `seed`, so the
/// output does not depend on the number of worker threads.
pub fn simulated_annealing(
    q: &QuboMatrix,
    n_samples: usize,
    sweeps: usize,
    beta_range: Option<(f64, f64)>,
    seed: u64,
) -> Result<SampleSet> {
    if n_samples == 0 || sweeps == 0 {
        return Err(QuboError::InvalidParameter(
            "samples and sweeps must be positive".into(),
        ));
    }
    let (hot, cold) = beta_range.unwrap_or_else(|| default_beta_range(q));
    if !(hot > 0.0 && cold > 0.0 && hot.is_finite() && cold.is_finite()) {
        return Err(QuboError::InvalidParameter(format!(
            "invalid inverse temperature range ({hot}, {cold})"
        )));
    }
    let betas: Vec<f64> = (0..sweeps)
        .map(|t| {
            if sweeps == 1 {
                cold
            } else {
                hot * (cold / hot).powf(t as f64 / (sweeps - 1) as f64)
            }
        })
        .collect();
    let s = couplings(q);
    let samples = (0..n_samples as u64)
        .into_par_iter()
        .map(|chain| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(chain);
            let z = Assignment(anneal_chain(q, &s, &betas, &mut rng));
            let energy = q.energy(&z)?;
            Ok(Sample {
                assignment: z,
                energy,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SampleSet {
        samples,
        params: AnnealParams {
            n_samples,
            sweeps,
            beta_range: (hot, cold),
            seed,
        },
    })
}

/// `(e - e_star) / e`; 0 when `e == e_star`, `None` when `e == 0` otherwise.
pub fn relative_energy(e: f64, e_star: f64) -> Option<f64> {
    if e == e_star {
        Some(0.0)
    } else if e == 0.0 {
        None
    } else {
        Some((e - e_star) / e)
    }
}

/// Median of the values; the mean of the middle pair for even counts.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    })
}

/// Median relative energy of the samples with respect to `optimum`, ignoring undefined values.
pub fn median_relative_energy(samples: &SampleSet, optimum: f64) -> Option<f64> {
    let rel: Vec<f64> = samples
        .samples
        .iter()
        .filter_map(|s| relative_energy(s.energy, optimum))
        .collect();
    median(&rel)
}
