//! Epsilon-ball hypergraph construction and incidence bookkeeping.
//!
//! A hypergraph is stored as membership lists, one sorted vertex list per
//! hyperedge; the incidence matrix `H` (`H[v][e] = 1` iff vertex `v` belongs
//! to hyperedge `e`) is implied and never materialised densely.

mod conv;
mod distance;

pub(crate) use conv::{graph_propagate_f64, propagate_f64};
pub use conv::{
    graphconv_low_order, hyperconv, hyperconv_grad_theta, hyperconv_oracle, propagation_matrix,
    Theta,
};
pub use distance::{pairwise_sq_distances, pairwise_sq_distances_naive};

use crate::error::{Error, Result};
use crate::tensor::{FeatureMatrix, Scalar};

/// Incidence structure: `vertex_count` vertices and one sorted membership
/// list per hyperedge.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Hypergraph {
    vertex_count: usize,
    hyperedges: Vec<Vec<usize>>,
}

impl Hypergraph {
    /// Validates that every hyperedge is non-empty, strictly ascending and
    /// references only vertices below `vertex_count`.
    pub fn new(vertex_count: usize, hyperedges: Vec<Vec<usize>>) -> Result<Self> {
        if vertex_count == 0 {
            return Err(Error::InvalidParameter(
                "hypergraph needs at least one vertex".into(),
            ));
        }
        for (e, members) in hyperedges.iter().enumerate() {
            if members.is_empty() {
                return Err(Error::InvalidParameter(format!("hyperedge {e} is empty")));
            }
            for pair in members.windows(2) {
                if pair[0] >= pair[1] {
                    return Err(Error::InvalidParameter(format!(
                        "hyperedge {e} is not strictly ascending: {} then {}",
                        pair[0], pair[1]
                    )));
                }
            }
            let last = *members.last().unwrap();
            if last >= vertex_count {
                return Err(Error::InvalidParameter(format!(
                    "hyperedge {e} references vertex {last}, vertex count is {vertex_count}"
                )));
            }
        }
        Ok(Self {
            vertex_count,
            hyperedges,
        })
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    pub fn hyperedge_count(&self) -> usize {
        self.hyperedges.len()
    }

    pub fn hyperedges(&self) -> &[Vec<usize>] {
        &self.hyperedges
    }

    /// For each vertex, the ascending list of hyperedges containing it
    /// (the transpose of the membership lists).
    pub fn vertex_memberships(&self) -> Vec<Vec<usize>> {
        let mut memberships = vec![Vec::new(); self.vertex_count];
        for (e, members) in self.hyperedges.iter().enumerate() {
            for &v in members {
                memberships[v].push(e);
            }
        }
        memberships
    }

    /// Row and column sums of the incidence matrix.
    pub fn degrees(&self) -> DegreePair {
        let mut vertex_degrees = vec![0usize; self.vertex_count];
        for members in &self.hyperedges {
            for &v in members {
                vertex_degrees[v] += 1;
            }
        }
        let hyperedge_degrees = self.hyperedges.iter().map(Vec::len).collect();
        DegreePair {
            vertex_degrees,
            hyperedge_degrees,
        }
    }

    /// Line-oriented text form: first line `N M`, then one line of ascending
    /// vertex indices per hyperedge.
    pub fn to_text(&self) -> String {
        let mut out = format!("{} {}\n", self.vertex_count, self.hyperedges.len());
        for members in &self.hyperedges {
            let line: Vec<String> = members.iter().map(|v| v.to_string()).collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Format("empty hypergraph text".into()))?;
        let mut parts = header.split_whitespace();
        let n: usize = parts
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| Error::Format("bad hypergraph header".into()))?;
        let m: usize = parts
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| Error::Format("bad hypergraph header".into()))?;
        let mut hyperedges = Vec::with_capacity(m);
        for line in lines.take(m) {
            let members: std::result::Result<Vec<usize>, _> =
                line.split_whitespace().map(str::parse).collect();
            let members =
                members.map_err(|_| Error::Format(format!("bad hyperedge line: {line}")))?;
            hyperedges.push(members);
        }
        if hyperedges.len() != m {
            return Err(Error::Format(format!(
                "expected {m} hyperedges, found {}",
                hyperedges.len()
            )));
        }
        Self::new(n, hyperedges)
    }
}

/// Vertex and hyperedge degree vectors (diagonals of `D_v` and `D_e`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DegreePair {
    pub vertex_degrees: Vec<usize>,
    pub hyperedge_degrees: Vec<usize>,
}

impl DegreePair {
    /// Total number of incidences; equals both degree sums.
    pub fn incidences(&self) -> usize {
        self.hyperedge_degrees.iter().sum()
    }
}

/// Threshold for epsilon-ball construction. The metric is fixed to
/// Euclidean distance on channel vectors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpsilonBallParams {
    epsilon: f64,
}

impl EpsilonBallParams {
    pub fn new(epsilon: f64) -> Result<Self> {
        if !epsilon.is_finite() || epsilon < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "epsilon must be finite and >= 0, got {epsilon}"
            )));
        }
        Ok(Self { epsilon })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }
}

#[inline]
pub(crate) fn sq_dist_f64<T: Scalar>(a: &[T], b: &[T]) -> f64 {
    let mut acc = 0.0f64;
    for (x, y) in a.iter().zip(b) {
        let d = x.as_f64() - y.as_f64();
        acc += d * d;
    }
    acc
}

/// Builds one hyperedge per vertex: the set of vertices strictly within
/// `epsilon` of the centre, plus the centre itself. `M = N` always; balls
/// that coincide as sets are kept as separate hyperedges.
pub fn build_epsilon_ball_hypergraph<T: Scalar>(
    x: &FeatureMatrix<T>,
    params: &EpsilonBallParams,
) -> Result<Hypergraph> {
    if !x.has_finite_entries() {
        return Err(Error::NonFinite(
            "epsilon-ball construction requires finite features".into(),
        ));
    }
    let n = x.vertices();
    let eps_sq = params.epsilon * params.epsilon;
    let mut hyperedges = Vec::with_capacity(n);
    for v in 0..n {
        let center = x.row(v);
        let mut members = Vec::new();
        for u in 0..n {
            // The centre is always a member; neighbours need strict inequality.
            if u == v || sq_dist_f64(center, x.row(u)) < eps_sq {
                members.push(u);
            }
        }
        hyperedges.push(members);
    }
    Hypergraph::new(n, hyperedges)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn three_point_line() -> FeatureMatrix {
        FeatureMatrix::new(3, 1, vec![0.0, 1.0, 5.0]).unwrap()
    }

    #[test]
    fn three_point_example_balls_and_degrees() {
        let g = build_epsilon_ball_hypergraph(
            &three_point_line(),
            &EpsilonBallParams::new(2.0).unwrap(),
        )
        .unwrap();
        assert_eq!(g.hyperedges(), &[vec![0, 1], vec![0, 1], vec![2]]);
        let d = g.degrees();
        assert_eq!(d.vertex_degrees, vec![2, 2, 1]);
        assert_eq!(d.hyperedge_degrees, vec![2, 2, 1]);
        assert_eq!(d.incidences(), 5);
    }

    #[test]
    fn zero_epsilon_gives_identity_pattern() {
        let g = build_epsilon_ball_hypergraph(
            &three_point_line(),
            &EpsilonBallParams::new(0.0).unwrap(),
        )
        .unwrap();
        assert_eq!(g.hyperedges(), &[vec![0], vec![1], vec![2]]);
        // Strict inequality: even duplicated points stay singleton at eps = 0.
        let dup = FeatureMatrix::new(2, 1, vec![3.0, 3.0]).unwrap();
        let g = build_epsilon_ball_hypergraph(&dup, &EpsilonBallParams::new(0.0).unwrap()).unwrap();
        assert_eq!(g.hyperedges(), &[vec![0], vec![1]]);
    }

    #[test]
    fn large_epsilon_gives_full_hypergraph() {
        let g = build_epsilon_ball_hypergraph(
            &three_point_line(),
            &EpsilonBallParams::new(100.0).unwrap(),
        )
        .unwrap();
        for members in g.hyperedges() {
            assert_eq!(members, &[0, 1, 2]);
        }
        let d = g.degrees();
        assert_eq!(d.vertex_degrees, vec![3, 3, 3]);
        assert_eq!(d.hyperedge_degrees, vec![3, 3, 3]);
    }

    #[test]
    fn rejects_non_finite_features() {
        let x = FeatureMatrix::new(2, 1, vec![0.0, f32::NAN]).unwrap();
        assert!(matches!(
            build_epsilon_ball_hypergraph(&x, &EpsilonBallParams::new(1.0).unwrap()),
            Err(Error::NonFinite(_))
        ));
    }

    #[test]
    fn rejects_invalid_epsilon() {
        assert!(EpsilonBallParams::new(-1.0).is_err());
        assert!(EpsilonBallParams::new(f64::INFINITY).is_err());
    }

    #[test]
    fn constructor_validates_membership_lists() {
        assert!(Hypergraph::new(3, vec![vec![]]).is_err());
        assert!(Hypergraph::new(3, vec![vec![1, 0]]).is_err());
        assert!(Hypergraph::new(3, vec![vec![0, 0]]).is_err());
        assert!(Hypergraph::new(3, vec![vec![0, 3]]).is_err());
    }

    #[test]
    fn text_round_trip() {
        let g = Hypergraph::new(4, vec![vec![0, 2], vec![1], vec![0, 1, 3]]).unwrap();
        let text = g.to_text();
        assert_eq!(text, "4 3\n0 2\n1\n0 1 3\n");
        assert_eq!(Hypergraph::from_text(&text).unwrap(), g);
    }

    #[test]
    fn text_parse_rejects_malformed_input() {
        assert!(Hypergraph::from_text("").is_err());
        assert!(Hypergraph::from_text("2\n0\n").is_err());
        assert!(Hypergraph::from_text("2 2\n0\n").is_err());
        assert!(Hypergraph::from_text("2 1\nzero\n").is_err());
    }

    #[test]
    fn memberships_transpose_incidence() {
        let g = Hypergraph::new(3, vec![vec![0, 1], vec![0, 1], vec![2]]).unwrap();
        assert_eq!(
            g.vertex_memberships(),
            vec![vec![0, 1], vec![0, 1], vec![2]]
        );
    }
}
