//! Instance generators: subset sum, binary clustering and pairwise MRFs.

use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{QuboError, Result};
use crate::qubo::QuboMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    SubsetSum,
    BinClustering,
    Mrf,
}

impl Family {
    pub const ALL: [Family; 3] = [Family::SubsetSum, Family::BinClustering, Family::Mrf];

    pub fn name(&self) -> &'static str {
        match self {
            Family::SubsetSum => "subset_sum",
            Family::BinClustering => "bin_clustering",
            Family::Mrf => "mrf",
        }
    }
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = QuboError;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "subset_sum" | "subsetsum" => Ok(Family::SubsetSum),
            "bin_clustering" | "binclustering" | "clustering" => Ok(Family::BinClustering),
            "mrf" => Ok(Family::Mrf),
            other => Err(QuboError::InvalidParameter(format!("unknown family {other:?}"))),
        }
    }
}

/// Family-specific description from which the matrix is rebuilt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Params {
    SubsetSum { values: Vec<f64>, target: f64 },
    BinClustering { points: Vec<Vec<f64>> },
    Mrf {
        n_vars: usize,
        edge_density: f64,
        potential_scale: f64,
    },
}

/// Minimises `(sum a_i z_i - target)^2` without the constant `target^2`.
pub fn gen_subset_sum(values: &[f64], target: f64) -> Result<QuboMatrix> {
    if values.is_empty() {
        return Err(QuboError::InvalidParameter("subset sum needs values".into()));
    }
    let n = values.len();
    let mut entries = Vec::with_capacity(n * (n + 1) / 2);
    for i in 0..n {
        entries.push((i, i, values[i] * values[i] - 2.0 * target * values[i]));
        for j in i + 1..n {
            entries.push((i, j, 2.0 * values[i] * values[j]));
        }
    }
    QuboMatrix::from_entries(n, entries)
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Within-cluster pair scatter of a two-way labelling, constant dropped.
pub fn gen_bin_clustering(points: &[Vec<f64>]) -> Result<QuboMatrix> {
    let n = points.len();
    if n < 2 {
        return Err(QuboError::InvalidParameter(
            "clustering needs at least two points".into(),
        ));
    }
    let dim = points[0].len();
    if let Some(p) = points.iter().find(|p| p.len() != dim) {
        return Err(QuboError::DimensionMismatch {
            expected: dim,
            actual: p.len(),
        });
    }
    let d: Vec<Vec<f64>> = points
        .iter()
        .map(|a| points.iter().map(|b| squared_distance(a, b)).collect())
        .collect();
    let mut entries = Vec::with_capacity(n * (n + 1) / 2);
    for i in 0..n {
        let row: f64 = (0..n).filter(|&j| j != i).map(|j| d[i][j]).sum();
        entries.push((i, i, -row));
        for j in i + 1..n {
            entries.push((i, j, 2.0 * d[i][j]));
        }
    }
    QuboMatrix::from_entries(n, entries)
}

/// Pairwise binary MRF with log-uniform potentials of random sign.
pub fn gen_mrf(n_vars: usize, edge_density: f64, potential_scale: f64, seed: u64) -> Result<QuboMatrix> {
    if !(edge_density > 0.0 && edge_density <= 1.0) {
        return Err(QuboError::InvalidParameter(format!(
            "edge density {edge_density} outside (0, 1]"
        )));
    }
    if !(potential_scale >= 1.0 && potential_scale.is_finite()) {
        return Err(QuboError::InvalidParameter(format!(
            "potential scale {potential_scale} must be finite and >= 1"
        )));
    }
    if n_vars == 0 {
        return Err(QuboError::EmptyDimension);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let log_scale = potential_scale.ln();
    let potential = |rng: &mut ChaCha8Rng| {
        let mag = if log_scale > 0.0 {
            rng.gen_range(-log_scale..=log_scale).exp()
        } else {
            1.0
        };
        if rng.gen_bool(0.5) {
            mag
        } else {
            -mag
        }
    };
    let mut entries = Vec::new();
    for i in 0..n_vars {
        entries.push((i, i, potential(&mut rng)));
        for j in i + 1..n_vars {
            if rng.gen_bool(edge_density) {
                entries.push((i, j, potential(&mut rng)));
            }
        }
    }
    QuboMatrix::from_entries(n_vars, entries)
}

/// Default MRF suite parameters.
pub const MRF_EDGE_DENSITY: f64 = 0.5;
pub const MRF_POTENTIAL_SCALE: f64 = 1000.0;

/// Separation of the two cluster centres in units of the point spread.
const CLUSTER_SEPARATION: f64 = 4.0;

/// A generated instance; the matrix is a pure function of `params`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemInstance {
    pub family: Family,
    pub params: Params,
    pub seed: u64,
    pub matrix: QuboMatrix,
}

impl ProblemInstance {
    pub fn from_params(family: Family, params: Params, seed: u64) -> Result<Self> {
        let matrix = build(family, &params, seed)?;
        Ok(ProblemInstance {
            family,
            params,
            seed,
            matrix,
        })
    }

    /// Random instance of size `n`.
    ///
    /// Subset sum draws reals in `[1, 1000)` and a target realised by a
    /// random nonempty subset. Clustering draws two unit-variance Gaussian
    /// clusters in the plane. MRFs use the default density and scale.
    pub fn random(family: Family, n: usize, seed: u64) -> Result<Self> {
        if n == 0 {
            return Err(QuboError::EmptyDimension);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = match family {
            Family::SubsetSum => {
                let values: Vec<f64> = (0..n).map(|_| rng.gen_range(1.0..1000.0)).collect();
                let mut chosen: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.5)).collect();
                if !chosen.contains(&true) {
                    chosen[rng.gen_range(0..n)] = true;
                }
                let target = (0..n).filter(|&i| chosen[i]).map(|i| values[i]).sum();
                Params::SubsetSum { values, target }
            }
            Family::BinClustering => {
                if n < 2 {
                    return Err(QuboError::InvalidParameter(
                        "clustering needs at least two points".into(),
                    ));
                }
                let normal = Normal::new(0.0, 1.0).expect("unit normal");
                let angle = rng.gen_range(0.0..std::f64::consts::TAU);
                let centre = [
                    CLUSTER_SEPARATION * angle.cos(),
                    CLUSTER_SEPARATION * angle.sin(),
                ];
                let points = (0..n)
                    .map(|i| {
                        let c = if i % 2 == 0 { [0.0, 0.0] } else { centre };
                        vec![c[0] + normal.sample(&mut rng), c[1] + normal.sample(&mut rng)]
                    })
                    .collect();
                Params::BinClustering { points }
            }
            Family::Mrf => Params::Mrf {
                n_vars: n,
                edge_density: MRF_EDGE_DENSITY,
                potential_scale: MRF_POTENTIAL_SCALE,
            },
        };
        Self::from_params(family, params, seed)
    }

    /// Rebuilds the matrix from the stored description.
    pub fn regenerate(&self) -> Result<QuboMatrix> {
        build(self.family, &self.params, self.seed)
    }
}

fn build(family: Family, params: &Params, seed: u64) -> Result<QuboMatrix> {
    match (family, params) {
        (Family::SubsetSum, Params::SubsetSum { values, target }) => gen_subset_sum(values, *target),
        (Family::BinClustering, Params::BinClustering { points }) => gen_bin_clustering(points),
        (
            Family::Mrf,
            Params::Mrf {
                n_vars,
                edge_density,
                potential_scale,
            },
        ) => gen_mrf(*n_vars, *edge_density, *potential_scale, seed),
        _ => Err(QuboError::InvalidParameter(format!(
            "parameters do not describe a {family} instance"
        ))),
    }
}

/// `count` random instances with seeds `seed, seed + 1, ...`.
pub fn generate_suite(family: Family, n: usize, count: usize, seed: u64) -> Result<Vec<ProblemInstance>> {
    (0..count as u64)
        .map(|i| ProblemInstance::random(family, n, seed.wrapping_add(i)))
        .collect()
}
