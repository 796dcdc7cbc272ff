//! Low-discrepancy and pseudo-random point generation, plus seed derivation.
//!
//! Low-discrepancy points come from an Owen-scrambled Sobol sequence; every
//! generator here is a pure function of its seed so that designs, candidate
//! sets and Monte-Carlo draws are reproducible.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bounds::Bounds;
use crate::error::{Error, Result};

/// Largest number of points the scrambled Sobol generator supports.
pub const MAX_SOBOL_POINTS: usize = 1 << 16;

/// SplitMix64 finalizer, used as a counter hash to derive independent seeds.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives the `counter`-th child seed of `master`.
pub fn derive_seed(master: u64, counter: u64) -> u64 {
    mix64(mix64(master) ^ mix64(counter.wrapping_add(0x632B_E59B_D9B4_E019)))
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `n` scrambled Sobol points in `[0,1)^dim`.
pub fn sobol_unit(n: usize, dim: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    if n > MAX_SOBOL_POINTS {
        return Err(Error::InvalidArgument(format!(
            "scrambled Sobol sequences support at most {MAX_SOBOL_POINTS} points, requested {n}"
        )));
    }
    if dim > sobol_burley::NUM_DIMENSIONS as usize {
        return Err(Error::InvalidArgument(format!(
            "scrambled Sobol sequences support at most {} dimensions",
            sobol_burley::NUM_DIMENSIONS
        )));
    }
    let seed = (seed ^ (seed >> 32)) as u32;
    Ok((0..n as u32)
        .map(|i| {
            (0..dim as u32)
                .map(|d| {
                    // Center within the f32 cell so that no coordinate is exactly 0.
                    let v = sobol_burley::sample(i, d, seed) as f64;
                    v + 0.5 / (1u32 << 24) as f64
                })
                .collect()
        })
        .collect())
}

/// `n` scrambled Sobol points mapped into `bounds`.
pub fn sobol_in(bounds: &Bounds, n: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    Ok(sobol_unit(n, bounds.dim(), seed)?
        .iter()
        .map(|t| bounds.from_unit(t))
        .collect())
}

/// A uniform draw from `bounds`.
pub fn uniform_in<R: Rng + ?Sized>(bounds: &Bounds, rng: &mut R) -> Vec<f64> {
    (0..bounds.dim())
        .map(|i| bounds.lo()[i] + rng.gen::<f64>() * bounds.width(i))
        .collect()
}

/// Regular grid with `per_dim` points per axis, endpoints included, in
/// row-major order (last coordinate varies fastest).
pub fn grid_in(bounds: &Bounds, per_dim: usize) -> Vec<Vec<f64>> {
    let dim = bounds.dim();
    let axis = |i: usize, k: usize| {
        if per_dim == 1 {
            bounds.lo()[i] + 0.5 * bounds.width(i)
        } else {
            bounds.lo()[i] + bounds.width(i) * k as f64 / (per_dim - 1) as f64
        }
    };
    let total = per_dim.pow(dim as u32);
    (0..total)
        .map(|mut flat| {
            let mut p = vec![0.0; dim];
            for i in (0..dim).rev() {
                p[i] = axis(i, flat % per_dim);
                flat /= per_dim;
            }
            p
        })
        .collect()
}

/// How a finite candidate set over a box is generated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CandidateSpec {
    /// Regular grid with `per_dim` points per axis.
    Grid { per_dim: usize },
    /// Scrambled Sobol points.
    Sobol { n: usize, seed: u64 },
    /// Independent uniform points.
    Random { n: usize, seed: u64 },
}

impl CandidateSpec {
    /// Grid for dimension ≤ 3, low-discrepancy otherwise.
    pub fn default_for(dim: usize, n: usize, seed: u64) -> Self {
        if dim <= 3 {
            let per_dim = (n as f64).powf(1.0 / dim as f64).round().max(1.0) as usize;
            CandidateSpec::Grid { per_dim }
        } else {
            CandidateSpec::Sobol { n, seed }
        }
    }

    pub fn len(&self, dim: usize) -> usize {
        match self {
            CandidateSpec::Grid { per_dim } => per_dim.saturating_pow(dim as u32),
            CandidateSpec::Sobol { n, .. } | CandidateSpec::Random { n, .. } => *n,
        }
    }

    pub fn generate(&self, bounds: &Bounds) -> Result<Vec<Vec<f64>>> {
        match self {
            CandidateSpec::Grid { per_dim } => {
                if *per_dim == 0 {
                    return Err(Error::InvalidArgument("grid needs at least one point per axis".into()));
                }
                Ok(grid_in(bounds, *per_dim))
            }
            CandidateSpec::Sobol { n, seed } => sobol_in(bounds, *n, *seed),
            CandidateSpec::Random { n, seed } => {
                let mut rng = rng_from_seed(*seed);
                Ok((0..*n).map(|_| uniform_in(bounds, &mut rng)).collect())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sobol_is_deterministic_and_inside() {
        let b = Bounds::new(vec![0.0, 1.0, -2.0], vec![1.0, 2.0, 2.0]).unwrap();
        let a = sobol_in(&b, 300, 7).unwrap();
        assert_eq!(a, sobol_in(&b, 300, 7).unwrap());
        assert_ne!(a, sobol_in(&b, 300, 8).unwrap());
        assert!(a.iter().all(|p| b.contains(p)));
    }

    #[test]
    fn sobol_refuses_oversized_requests() {
        assert!(sobol_unit(MAX_SOBOL_POINTS + 1, 2, 0).is_err());
    }

    #[test]
    fn grid_covers_endpoints() {
        let b = Bounds::new(vec![0.0, 1.0], vec![1.0, 2.0]).unwrap();
        let g = grid_in(&b, 3);
        assert_eq!(g.len(), 9);
        assert_eq!(g[0], vec![0.0, 1.0]);
        assert_eq!(g[1], vec![0.0, 1.5]);
        assert_eq!(g[8], vec![1.0, 2.0]);
    }

    #[test]
    fn derived_seeds_differ() {
        let s: Vec<u64> = (0..100).map(|c| derive_seed(42, c)).collect();
        let mut dedup = s.clone();
        dedup.sort_unstable();
        dedup.dedup();
        assert_eq!(dedup.len(), s.len());
        assert_eq!(derive_seed(42, 3), s[3]);
    }
}
