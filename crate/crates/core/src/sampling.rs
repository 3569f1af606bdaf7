//! Seeded i.i.d. uncertainty generators.
//!
//! Each draw owns a ChaCha8 stream seeded from a `u64`. Per-trial seeds come
//! from [`derive`], which applies the SplitMix64 finalizer to
//! `seed + (k + 1)·γ` with γ the odd golden-ratio constant. The map
//! `k ↦ seed + (k + 1)·γ` is injective modulo 2⁶⁴ and the finalizer is a
//! bijection, so distinct trial indices never share a stream seed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Recorded in reports so runs can be reproduced.
pub const GENERATOR: &str = "rand_chacha::ChaCha8Rng seeded by seed_from_u64; trial k uses splitmix64(seed + (k+1)*0x9E3779B97F4A7C15)";

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// The distribution of δ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum DistributionSpec {
    UniformBox { lower: Vec<f64>, upper: Vec<f64> },
    GaussianDiag { mean: Vec<f64>, stddev: Vec<f64> },
    /// Rows of the table are drawn uniformly with replacement.
    Empirical { table: Vec<Vec<f64>> },
}

impl DistributionSpec {
    pub fn uniform_unit(dim: usize) -> Self {
        DistributionSpec::UniformBox {
            lower: vec![0.0; dim],
            upper: vec![1.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            DistributionSpec::UniformBox { lower, .. } => lower.len(),
            DistributionSpec::GaussianDiag { mean, .. } => mean.len(),
            DistributionSpec::Empirical { table } => table.first().map_or(0, Vec::len),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            DistributionSpec::UniformBox { lower, upper } => {
                if lower.is_empty() || lower.len() != upper.len() {
                    return Err(Error::Dimension("uniform box bounds must be nonempty and of equal length".into()));
                }
                if let Some(k) = (0..lower.len()).find(|&k| !(lower[k] < upper[k]) || !lower[k].is_finite() || !upper[k].is_finite()) {
                    return Err(Error::Domain(format!("uniform box needs finite lower < upper at coordinate {k}")));
                }
            }
            DistributionSpec::GaussianDiag { mean, stddev } => {
                if mean.is_empty() || mean.len() != stddev.len() {
                    return Err(Error::Dimension("gaussian mean and stddev must be nonempty and of equal length".into()));
                }
                if let Some(k) = (0..mean.len()).find(|&k| !(stddev[k] > 0.0) || !stddev[k].is_finite() || !mean[k].is_finite()) {
                    return Err(Error::Domain(format!("gaussian needs finite mean and stddev > 0 at coordinate {k}")));
                }
            }
            DistributionSpec::Empirical { table } => {
                let Some(first) = table.first() else {
                    return Err(Error::Domain("empirical table is empty".into()));
                };
                if first.is_empty() || table.iter().any(|row| row.len() != first.len()) {
                    return Err(Error::Dimension("empirical rows must be nonempty and of equal length".into()));
                }
            }
        }
        Ok(())
    }

    fn sample_one(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        match self {
            DistributionSpec::UniformBox { lower, upper } => lower
                .iter()
                .zip(upper)
                .map(|(l, u)| l + (u - l) * rng.random::<f64>())
                .collect(),
            DistributionSpec::GaussianDiag { mean, stddev } => mean
                .iter()
                .zip(stddev)
                .map(|(&mu, &sd)| Normal::new(mu, sd).expect("validated").sample(rng))
                .collect(),
            DistributionSpec::Empirical { table } => table[rng.random_range(0..table.len())].clone(),
        }
    }
}

/// `m` i.i.d. draws; a pure function of `(spec, m, seed)`.
pub fn draw(spec: &DistributionSpec, m: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..m).map(|_| spec.sample_one(&mut rng)).collect())
}

/// Seed of trial `trial_index` under master `seed`.
pub fn derive(seed: u64, trial_index: u64) -> u64 {
    let mut z = seed.wrapping_add(trial_index.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_draw() {
        assert!(draw(&DistributionSpec::uniform_unit(2), 0, 1).unwrap().is_empty());
    }

    #[test]
    fn deterministic() {
        let spec = DistributionSpec::GaussianDiag {
            mean: vec![0.0, 1.0],
            stddev: vec![1.0, 2.0],
        };
        assert_eq!(draw(&spec, 50, 9).unwrap(), draw(&spec, 50, 9).unwrap());
        assert_ne!(draw(&spec, 50, 9).unwrap(), draw(&spec, 50, 10).unwrap());
    }

    #[test]
    fn uniform_mean_within_clt_band() {
        let m = 100_000;
        let xs = draw(&DistributionSpec::uniform_unit(1), m, 2024).unwrap();
        let mean = xs.iter().map(|v| v[0]).sum::<f64>() / m as f64;
        let sigma = 1.0 / (12.0 * m as f64).sqrt();
        assert!((mean - 0.5).abs() < 4.0 * sigma, "{mean}");
    }

    #[test]
    fn empirical_draws_come_from_the_table() {
        let spec = DistributionSpec::Empirical {
            table: vec![vec![1.0], vec![2.0], vec![3.0]],
        };
        let xs = draw(&spec, 300, 5).unwrap();
        assert!(xs.iter().all(|v| [1.0, 2.0, 3.0].contains(&v[0])));
        for value in [1.0, 2.0, 3.0] {
            assert!(xs.iter().any(|v| v[0] == value));
        }
    }

    #[test]
    fn invalid_specs() {
        let bad = [
            DistributionSpec::UniformBox { lower: vec![1.0], upper: vec![1.0] },
            DistributionSpec::UniformBox { lower: vec![0.0], upper: vec![] },
            DistributionSpec::GaussianDiag { mean: vec![0.0], stddev: vec![0.0] },
            DistributionSpec::Empirical { table: vec![] },
            DistributionSpec::Empirical { table: vec![vec![1.0], vec![1.0, 2.0]] },
        ];
        for spec in bad {
            assert!(draw(&spec, 1, 0).is_err(), "{spec:?}");
        }
    }

    #[test]
    fn derive_distinguishes_trials() {
        assert_ne!(derive(7, 0), derive(7, 1));
        assert_eq!(derive(7, 3), derive(7, 3));
        let mut seen: Vec<u64> = (0..1_000_000).map(|k| derive(12345, k)).collect();
        seen.sort_unstable();
        seen.dedup();
        assert_eq!(seen.len(), 1_000_000);
    }
}
