//! Shared instance builders for the kernel benchmarks.

use hyperneck_core::init::seeded_rng;
use hyperneck_core::tensor::FeatureMatrix;
use rand::Rng;

/// Uniform `[0, 1)` point set of the given size.
pub fn bench_matrix(vertices: usize, channels: usize, seed: u64) -> FeatureMatrix {
    let mut rng = seeded_rng(seed);
    let data = (0..vertices * channels)
        .map(|_| rng.random::<f32>())
        .collect();
    FeatureMatrix::new(vertices, channels, data).expect("bench dimensions are valid")
}
