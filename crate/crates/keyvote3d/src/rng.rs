//! Deterministic seeded randomness.
//!
//! Every stochastic operation in this crate derives a private RNG stream from
//! a base seed plus the indices that identify the work item (trial, keypoint,
//! RANSAC iteration, vote-field cell). Streams are independent of scheduling,
//! so serial and parallel execution produce bitwise-identical results.

use nalgebra::Vector3;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// splitmix64 finalizer; full-avalanche mixing of one word.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Derives a child seed from a base seed and a path of stream indices.
pub fn derive_seed(base: u64, path: &[u64]) -> u64 {
    let mut state = mix(base);
    for &index in path {
        state = mix(state ^ index.wrapping_mul(0x9e3779b97f4a7c15));
    }
    state
}

/// A ChaCha8 stream for the given `(base, path)` identity.
pub fn stream(base: u64, path: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(base, path))
}

/// Uniform random unit vector (Gaussian normalization).
pub fn unit_vector<R: Rng>(rng: &mut R) -> Vector3<f64> {
    loop {
        let v = Vector3::new(
            rng.sample::<f64, _>(rand_distr::StandardNormal),
            rng.sample::<f64, _>(rand_distr::StandardNormal),
            rng.sample::<f64, _>(rand_distr::StandardNormal),
        );
        let norm = v.norm();
        if norm > 1e-12 {
            return v / norm;
        }
    }
}

/// Draws `count` distinct indices from `0..n` by rejection.
///
/// Requires `count <= n`. Order of draws is preserved (first accepted first).
pub fn distinct_indices<R: Rng>(rng: &mut R, n: usize, count: usize) -> Vec<usize> {
    debug_assert!(count <= n);
    let mut picked = Vec::with_capacity(count);
    while picked.len() < count {
        let candidate = rng.random_range(0..n);
        if !picked.contains(&candidate) {
            picked.push(candidate);
        }
    }
    picked
}
