//! Seeded random helpers. Every stochastic path in the crate takes an
//! explicit generator so identical seeds reproduce identical values
//! bit-for-bit across runs and platforms.

use crate::error::Result;
use crate::tensor::{FeatureMatrix, TensorMap};
use rand::{Rng, SeedableRng};

pub type SeededRng = rand_chacha::ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> SeededRng {
    SeededRng::seed_from_u64(seed)
}

/// Uniform map over `[lo, hi)`.
pub fn random_map<R: Rng>(
    batch: usize,
    channels: usize,
    height: usize,
    width: usize,
    lo: f32,
    hi: f32,
    rng: &mut R,
) -> Result<TensorMap> {
    let data = (0..batch * channels * height * width)
        .map(|_| lo + (hi - lo) * rng.random::<f32>())
        .collect();
    TensorMap::new(batch, channels, height, width, data)
}

/// Uniform matrix over `[lo, hi)`.
pub fn random_matrix<R: Rng>(
    vertices: usize,
    channels: usize,
    lo: f32,
    hi: f32,
    rng: &mut R,
) -> Result<FeatureMatrix> {
    let data = (0..vertices * channels)
        .map(|_| lo + (hi - lo) * rng.random::<f32>())
        .collect();
    FeatureMatrix::new(vertices, channels, data)
}
