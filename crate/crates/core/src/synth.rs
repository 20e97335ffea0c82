//! Synthetic clustered point sets and the correlation-mode ablation they
//! support: well-separated clusters let the propagation modes be compared
//! by how much of the within-cluster variance they average away.

use crate::error::{Error, Result};
use crate::hypergraph::{build_epsilon_ball_hypergraph, EpsilonBallParams};
use crate::init::seeded_rng;
use crate::neck::CorrelationMode;
use crate::tensor::FeatureMatrix;
use rand::Rng;

/// Geometry of a synthetic clustered point set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClusterSpec {
    pub k_clusters: usize,
    pub points_per_cluster: usize,
    pub dim: usize,
    /// Centres sit at this distance from the origin along distinct axes,
    /// so mutual centre distance is `separation * sqrt(2)`.
    pub center_separation: f64,
    /// Per-coordinate uniform noise half-width around each centre.
    pub intra_spread: f64,
    pub seed: u64,
}

impl Default for ClusterSpec {
    fn default() -> Self {
        Self {
            k_clusters: 4,
            points_per_cluster: 16,
            dim: 8,
            center_separation: 20.0,
            intra_spread: 1.0,
            seed: 42,
        }
    }
}

impl ClusterSpec {
    pub fn validate(&self) -> Result<()> {
        if self.k_clusters == 0 || self.points_per_cluster == 0 || self.dim == 0 {
            return Err(Error::InvalidParameter(
                "cluster spec counts must be >= 1".into(),
            ));
        }
        if self.k_clusters > self.dim {
            return Err(Error::InvalidParameter(format!(
                "axis-aligned centres need k_clusters <= dim, got {} > {}",
                self.k_clusters, self.dim
            )));
        }
        if !self.center_separation.is_finite()
            || !self.intra_spread.is_finite()
            || self.intra_spread <= 0.0
        {
            return Err(Error::InvalidParameter(
                "separation and spread must be finite, spread > 0".into(),
            ));
        }
        if self.center_separation <= 2.0 * self.intra_spread {
            return Err(Error::InvalidParameter(format!(
                "separation {} must exceed twice the spread {}",
                self.center_separation, self.intra_spread
            )));
        }
        Ok(())
    }

    pub fn total_points(&self) -> usize {
        self.k_clusters * self.points_per_cluster
    }
}

/// A generated point set with its cluster assignment and centres.
#[derive(Debug, Clone)]
pub struct ClusteredPoints {
    pub features: FeatureMatrix,
    pub labels: Vec<usize>,
    /// `k_clusters x dim` centre matrix.
    pub centers: FeatureMatrix,
}

/// Draws `points_per_cluster` points around each centre, uniform in
/// `[-spread, spread]` per coordinate. Points of one cluster are contiguous.
pub fn synthesize_clusters(spec: &ClusterSpec) -> Result<ClusteredPoints> {
    spec.validate()?;
    let mut rng = seeded_rng(spec.seed);
    let (k, dim) = (spec.k_clusters, spec.dim);
    let mut centers = vec![0.0f32; k * dim];
    for j in 0..k {
        centers[j * dim + j] = spec.center_separation as f32;
    }
    let mut data = vec![0.0f32; spec.total_points() * dim];
    let mut labels = vec![0usize; spec.total_points()];
    let spread = spec.intra_spread as f32;
    for j in 0..k {
        for p in 0..spec.points_per_cluster {
            let v = j * spec.points_per_cluster + p;
            labels[v] = j;
            for d in 0..dim {
                data[v * dim + d] =
                    centers[j * dim + d] + (rng.random::<f32>() * 2.0 - 1.0) * spread;
            }
        }
    }
    Ok(ClusteredPoints {
        features: FeatureMatrix::new(spec.total_points(), dim, data)?,
        labels,
        centers: FeatureMatrix::new(k, dim, centers)?,
    })
}

/// Mean squared deviation from the own-cluster mean, averaged over every
/// entry of the matrix.
pub fn within_cluster_variance(features: &FeatureMatrix, labels: &[usize]) -> f64 {
    within_cluster_variance_f64(
        &features
            .data()
            .iter()
            .map(|&v| v as f64)
            .collect::<Vec<_>>(),
        features.channels(),
        labels,
    )
}

fn within_cluster_variance_f64(data: &[f64], channels: usize, labels: &[usize]) -> f64 {
    let vertices = labels.len();
    let clusters = labels.iter().copied().max().map_or(0, |m| m + 1);
    let mut sums = vec![0.0f64; clusters * channels];
    let mut counts = vec![0usize; clusters];
    for (v, &label) in labels.iter().enumerate() {
        counts[label] += 1;
        for c in 0..channels {
            sums[label * channels + c] += data[v * channels + c];
        }
    }
    for (j, &count) in counts.iter().enumerate() {
        if count > 0 {
            for c in 0..channels {
                sums[j * channels + c] /= count as f64;
            }
        }
    }
    let mut acc = 0.0f64;
    for (v, &label) in labels.iter().enumerate() {
        for c in 0..channels {
            let d = data[v * channels + c] - sums[label * channels + c];
            acc += d * d;
        }
    }
    acc / (vertices * channels) as f64
}

/// Variance ratio of one mode's propagation output against the raw points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AblationRow {
    pub mode: CorrelationMode,
    pub variance_ratio: f64,
}

/// Runs the none / low-order / high-order propagation (theta = identity)
/// over a synthetic point set and reports each mode's within-cluster
/// variance relative to the input's.
pub fn ablation_variance_ratios(spec: &ClusterSpec, epsilon: f64) -> Result<Vec<AblationRow>> {
    let points = synthesize_clusters(spec)?;
    let channels = points.features.channels();
    let raw: Vec<f64> = points.features.data().iter().map(|&v| v as f64).collect();
    let base = within_cluster_variance_f64(&raw, channels, &points.labels);
    let params = EpsilonBallParams::new(epsilon)?;
    let mut rows = Vec::with_capacity(3);
    for mode in [
        CorrelationMode::None,
        CorrelationMode::LowOrder,
        CorrelationMode::HighOrder,
    ] {
        let propagated: Vec<f64> = match mode {
            CorrelationMode::None => raw.clone(),
            CorrelationMode::LowOrder => {
                crate::hypergraph::graph_propagate_f64(&points.features, &params)?
            }
            CorrelationMode::HighOrder => {
                let graph = build_epsilon_ball_hypergraph(&points.features, &params)?;
                crate::hypergraph::propagate_f64(&points.features, &graph)
            }
        };
        let variance = within_cluster_variance_f64(&propagated, channels, &points.labels);
        rows.push(AblationRow {
            mode,
            variance_ratio: variance / base,
        });
    }
    Ok(rows)
}
