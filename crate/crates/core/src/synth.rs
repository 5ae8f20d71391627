//! Synthetic instances under the random corruption model: each pair is
//! observed independently with probability `p_obs`; an observed block equals
//! the identity with probability `p_true` and is otherwise a uniformly random
//! permutation matrix (which may coincide with the identity by chance).
//!
//! Generation is deterministic: every pair draws from its own PRNG stream
//! derived from `(seed, i, j)`, so instances are reproducible bit for bit
//! and pairs are statistically independent.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::instance::{BlockMatrix, Instance, InstanceError, ObjectConfig};
use crate::polytope_lab::UniverseLabeling;

/// Name of the generator recorded in instance metadata.
pub const GENERATOR_ID: &str = "chacha8 pair streams (splitmix64 of seed,i,j), fisher-yates";

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("n must be at least 2, got {0}")]
    BadN(usize),
    #[error("d must be at least 1, got {0}")]
    BadD(usize),
    #[error("p_true must lie in [0,1], got {0}")]
    BadPTrue(f64),
    #[error("p_obs must lie in (0,1], got {0}")]
    BadPObs(f64),
    #[error(transparent)]
    Instance(#[from] InstanceError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorruptionParams {
    pub n: usize,
    /// Common object size.
    pub d: usize,
    pub p_true: f64,
    pub p_obs: f64,
    pub seed: u64,
}

impl CorruptionParams {
    pub fn validate(&self) -> Result<(), SynthError> {
        if self.n < 2 {
            return Err(SynthError::BadN(self.n));
        }
        if self.d == 0 {
            return Err(SynthError::BadD(self.d));
        }
        if !(0.0..=1.0).contains(&self.p_true) || !self.p_true.is_finite() {
            return Err(SynthError::BadPTrue(self.p_true));
        }
        if !(self.p_obs > 0.0 && self.p_obs <= 1.0) {
            return Err(SynthError::BadPObs(self.p_obs));
        }
        Ok(())
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d049bb133111eb);
    x ^ (x >> 31)
}

/// Independent stream for pair `(i, j)` under a master seed.
pub fn pair_rng(seed: u64, i: usize, j: usize) -> ChaCha8Rng {
    let mixed = splitmix64(seed ^ splitmix64((i as u64) << 32 | j as u64));
    ChaCha8Rng::seed_from_u64(mixed)
}

fn random_permutation(rng: &mut ChaCha8Rng, d: usize) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..d).collect();
    for t in (1..d).rev() {
        let s = rng.gen_range(0..=t);
        perm.swap(t, s);
    }
    perm
}

/// Draws an instance from the corruption model. Ground truth is the identity
/// labeling: elements are ordered so that the q-th elements of all objects
/// match each other.
pub fn generate(params: &CorruptionParams) -> Result<Instance, SynthError> {
    params.validate()?;
    let config = ObjectConfig::uniform(params.n, params.d)?;
    let mut edges = Vec::new();
    let mut blocks = BTreeMap::new();
    for (i, j) in config.pairs() {
        let mut rng = pair_rng(params.seed, i, j);
        let observed = rng.gen::<f64>() < params.p_obs;
        if !observed {
            continue;
        }
        let truthful = rng.gen::<f64>() < params.p_true;
        let block = if truthful {
            BlockMatrix::identity(params.d)
        } else {
            BlockMatrix::from_permutation(&random_permutation(&mut rng, params.d))
        };
        edges.push((i, j));
        blocks.insert((i, j), block);
    }
    let gt = UniverseLabeling::new(
        (0..params.n)
            .map(|_| (1..=params.d as u32).collect())
            .collect(),
    )
    .expect("identity labeling is valid");
    let mut inst = Instance::new(config, edges, blocks, Some(gt))?;
    inst.set_meta(format!(
        "{GENERATOR_ID}; n={} d={} p_true={} p_obs={} seed={}",
        params.n, params.d, params.p_true, params.p_obs, params.seed
    ));
    Ok(inst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::validate_partial_map;

    #[test]
    fn all_true_complete_is_identity_everywhere() {
        let inst = generate(&CorruptionParams {
            n: 5,
            d: 3,
            p_true: 1.0,
            p_obs: 1.0,
            seed: 7,
        })
        .unwrap();
        assert!(inst.is_complete());
        for (i, j) in inst.config().pairs() {
            assert_eq!(*inst.input_block(i, j).unwrap(), BlockMatrix::identity(3));
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let params = CorruptionParams {
            n: 12,
            d: 4,
            p_true: 0.4,
            p_obs: 0.35,
            seed: 99,
        };
        let a = generate(&params).unwrap();
        let b = generate(&params).unwrap();
        assert_eq!(a, b);
        assert!(!a.is_complete(), "p_obs = 0.35 should drop some edges");
    }

    #[test]
    fn blocks_are_full_permutations() {
        let inst = generate(&CorruptionParams {
            n: 8,
            d: 5,
            p_true: 0.3,
            p_obs: 0.8,
            seed: 3,
        })
        .unwrap();
        for &(i, j) in inst.edges() {
            let b = inst.input_block(i, j).unwrap();
            assert_eq!(validate_partial_map(b).unwrap(), Ok(()));
            let total: f64 = b.entries().iter().sum();
            assert_eq!(total, 5.0, "permutation matrix has d ones");
        }
    }

    #[test]
    fn identity_fraction_matches_mixture_rate() {
        // Monte-Carlo oracle: with p_true = 1/2 and d = 3 the identity shows
        // up at rate p + (1-p)/d! = 0.5833..., and over ~2*10^4 pairs the
        // empirical rate stays within three binomial standard deviations.
        let params = CorruptionParams {
            n: 200,
            d: 3,
            p_true: 0.5,
            p_obs: 1.0,
            seed: 2024,
        };
        let inst = generate(&params).unwrap();
        let total = inst.edges().len() as f64;
        let identities = inst
            .edges()
            .iter()
            .filter(|&&(i, j)| *inst.input_block(i, j).unwrap() == BlockMatrix::identity(3))
            .count() as f64;
        let expect = 0.5 + 0.5 / 6.0;
        let sigma = (expect * (1.0 - expect) / total).sqrt();
        assert!(
            (identities / total - expect).abs() <= 3.0 * sigma,
            "rate {} vs {}",
            identities / total,
            expect
        );
    }
}
