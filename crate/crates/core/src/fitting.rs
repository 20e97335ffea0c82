//! Gradient-descent demonstration for the hypergraph convolution's mixing
//! matrix: fit theta so the convolution maps clustered points onto
//! per-cluster target rows, using the analytic gradient.

use crate::error::{Error, Result};
use crate::hypergraph::{
    build_epsilon_ball_hypergraph, hyperconv, hyperconv_grad_theta, EpsilonBallParams, Theta,
};
use crate::synth::{synthesize_clusters, ClusterSpec};
use crate::tensor::FeatureMatrix;

/// Fitting problem: clustered points, ball threshold, fixed step size and
/// iteration budget.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitSpec {
    pub cluster: ClusterSpec,
    pub epsilon: f64,
    pub step: f64,
    pub iterations: usize,
}

impl Default for FitSpec {
    fn default() -> Self {
        Self {
            cluster: ClusterSpec::default(),
            epsilon: 6.0,
            step: 1e-3,
            iterations: 200,
        }
    }
}

impl FitSpec {
    pub fn validate(&self) -> Result<()> {
        self.cluster.validate()?;
        if !self.step.is_finite() || self.step <= 0.0 {
            return Err(Error::InvalidParameter(
                "step must be finite and > 0".into(),
            ));
        }
        if self.iterations == 0 {
            return Err(Error::InvalidParameter("iterations must be >= 1".into()));
        }
        if !self.epsilon.is_finite() || self.epsilon < 0.0 {
            return Err(Error::InvalidParameter(
                "epsilon must be finite and >= 0".into(),
            ));
        }
        Ok(())
    }
}

/// Loss trace and final parameters of one fitting run. `losses[i]` is the
/// mean squared error before step `i`; the trace has `iterations + 1`
/// entries unless the run diverged earlier.
#[derive(Debug, Clone)]
pub struct FitOutcome {
    pub losses: Vec<f64>,
    pub theta: Theta,
    pub diverged: bool,
}

impl FitOutcome {
    pub fn initial_loss(&self) -> f64 {
        self.losses[0]
    }

    pub fn final_loss(&self) -> f64 {
        *self.losses.last().unwrap()
    }

    pub fn is_monotone_non_increasing(&self) -> bool {
        self.losses.windows(2).all(|w| w[1] <= w[0])
    }
}

fn mse(a: &FeatureMatrix, b: &FeatureMatrix) -> f64 {
    let mut acc = 0.0f64;
    for (x, y) in a.data().iter().zip(b.data()) {
        let d = *x as f64 - *y as f64;
        acc += d * d;
    }
    acc / a.data().len() as f64
}

/// Default targets: each point should map to twice its cluster's centre.
pub fn doubled_center_targets(spec: &ClusterSpec) -> Result<FeatureMatrix> {
    let points = synthesize_clusters(spec)?;
    let dim = spec.dim;
    let mut data = vec![0.0f32; points.features.vertices() * dim];
    for (v, &label) in points.labels.iter().enumerate() {
        for (d, &c) in points.centers.row(label).iter().enumerate() {
            data[v * dim + d] = 2.0 * c;
        }
    }
    FeatureMatrix::new(points.features.vertices(), dim, data)
}

/// Gradient descent on theta from zero init, minimising the mean squared
/// error between the convolution output and `targets`. Divergence
/// (non-finite or a 100x blow-up of the initial loss) stops the run early.
pub fn fit_theta_with_targets(spec: &FitSpec, targets: &FeatureMatrix) -> Result<FitOutcome> {
    spec.validate()?;
    let points = synthesize_clusters(&spec.cluster)?;
    let x = points.features;
    if targets.vertices() != x.vertices() || targets.channels() != x.channels() {
        return Err(Error::ShapeMismatch(
            "targets must match the point set's shape".into(),
        ));
    }
    let graph = build_epsilon_ball_hypergraph(&x, &EpsilonBallParams::new(spec.epsilon)?)?;
    let mut theta = Theta::zeros(x.channels());
    let entries = (x.vertices() * x.channels()) as f64;
    let mut losses = Vec::with_capacity(spec.iterations + 1);
    let mut diverged = false;
    for iteration in 0..=spec.iterations {
        let out = hyperconv(&x, &graph, &theta)?;
        let loss = mse(&out, targets);
        losses.push(loss);
        if !loss.is_finite() || loss > 100.0 * losses[0].max(f64::MIN_POSITIVE) {
            diverged = true;
            break;
        }
        if iteration == spec.iterations {
            break;
        }
        // d(MSE)/d(theta) = (2 / entries) * (P X)^T (out - targets)
        let scale = (2.0 / entries) as f32;
        let upstream_data: Vec<f32> = out
            .data()
            .iter()
            .zip(targets.data())
            .map(|(o, t)| scale * (o - t))
            .collect();
        let upstream = FeatureMatrix::new(x.vertices(), x.channels(), upstream_data)?;
        let grad = hyperconv_grad_theta(&x, &graph, &upstream)?;
        let step = spec.step as f32;
        for (t, g) in theta.data_mut().iter_mut().zip(grad.data()) {
            *t -= step * g;
        }
    }
    Ok(FitOutcome {
        losses,
        theta,
        diverged,
    })
}

/// Fits against the doubled-centre targets.
pub fn fit_theta(spec: &FitSpec) -> Result<FitOutcome> {
    let targets = doubled_center_targets(&spec.cluster)?;
    fit_theta_with_targets(spec, &targets)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn initial_loss_matches_closed_form() {
        let spec = FitSpec {
            iterations: 1,
            ..FitSpec::default()
        };
        let outcome = fit_theta(&spec).unwrap();
        // Theta starts at zero, so the first output is X itself and the
        // initial loss is mean((X - targets)^2), computable directly.
        let points = synthesize_clusters(&spec.cluster).unwrap();
        let targets = doubled_center_targets(&spec.cluster).unwrap();
        let want = mse(&points.features, &targets);
        assert_eq!(outcome.initial_loss(), want);
    }

    #[test]
    fn zero_target_gap_keeps_loss_constant_at_zero() {
        let spec = FitSpec {
            iterations: 5,
            ..FitSpec::default()
        };
        let points = synthesize_clusters(&spec.cluster).unwrap();
        // Targets equal to the zero-theta output leave nothing to fit.
        let outcome = fit_theta_with_targets(&spec, &points.features).unwrap();
        assert!(outcome.losses.iter().all(|&l| l == 0.0));
        assert!(outcome.theta.data().iter().all(|&t| t == 0.0));
    }

    #[test]
    fn default_spec_converges_monotonically_and_deeply() {
        let outcome = fit_theta(&FitSpec::default()).unwrap();
        assert!(!outcome.diverged);
        assert_eq!(outcome.losses.len(), 201);
        assert!(outcome.is_monotone_non_increasing());
        let ratio = outcome.final_loss() / outcome.initial_loss();
        assert!(
            ratio <= 0.1,
            "loss only fell to {ratio} of the initial value"
        );
    }

    #[test]
    fn oversized_steps_are_reported_as_divergence() {
        let spec = FitSpec {
            step: 10.0,
            ..FitSpec::default()
        };
        let outcome = fit_theta(&spec).unwrap();
        assert!(outcome.diverged);
    }
}
