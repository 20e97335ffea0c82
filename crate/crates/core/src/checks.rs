//! The runnable verification suite: every documented invariant of the
//! tensor kernels, hypergraph computation, neck and backbone, executed with
//! fixed seeds and reported with instance counts and maximum errors. The
//! harness `verify` command prints these reports and fails on any red check.

use crate::backbone::{backbone_forward, BackboneConfig, BackboneWeights};
use crate::error::{Error, Result};
use crate::hypergraph::{
    build_epsilon_ball_hypergraph, hyperconv, hyperconv_grad_theta, hyperconv_oracle,
    pairwise_sq_distances, pairwise_sq_distances_naive, propagation_matrix, EpsilonBallParams,
    Hypergraph, Theta,
};
use crate::init::{random_map, random_matrix, seeded_rng, SeededRng};
use crate::io::{tensor_from_bytes, tensor_to_bytes, RawTensor};
use crate::neck::{CorrelationMode, FeaturePyramid, Neck, NeckConfig, Pooling};
use crate::preset::ScalePreset;
use crate::synth::{synthesize_clusters, within_cluster_variance, ClusterSpec};
use crate::tensor::{
    concat_channels, conv2d_block, from_vertices, resample, split_channels, to_vertices,
    Activation, ConvBlockParams, FeatureMatrix, ResampleMode, TensorMap,
};
use rand::Rng;

/// Deliberate defect injection for negative-control runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fault {
    None,
    /// Overstates every hyperedge degree by one inside the
    /// row-stochasticity check, which must then fail.
    DegreeEPlusOne,
}

impl Fault {
    pub fn parse(text: &str) -> Result<Self> {
        match text.trim().to_ascii_lowercase().as_str() {
            "none" => Ok(Fault::None),
            "de_plus_one" => Ok(Fault::DegreeEPlusOne),
            other => Err(Error::InvalidParameter(format!("unknown fault: {other}"))),
        }
    }
}

/// Outcome of one check.
#[derive(Debug, Clone)]
pub struct CheckReport {
    pub name: &'static str,
    pub instances: usize,
    pub max_error: f64,
    pub passed: bool,
}

impl CheckReport {
    fn new(name: &'static str, instances: usize, max_error: f64, tolerance: f64) -> Self {
        Self {
            name,
            instances,
            max_error,
            passed: max_error <= tolerance,
        }
    }

    fn exact(name: &'static str, instances: usize, ok: bool) -> Self {
        Self {
            name,
            instances,
            max_error: if ok { 0.0 } else { 1.0 },
            passed: ok,
        }
    }
}

/// Largest elementwise error relative to the value magnitude, with `floor`
/// as the magnitude below which errors are measured absolutely (scaled by
/// the tolerance). For O(1)-scaled data a floor of 1.0 turns the tolerance
/// into a matching absolute tolerance near zero.
fn max_rel_err_f32(a: &[f32], b: &[f32], floor: f64) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            (x as f64 - y as f64).abs() / (x.abs() as f64).max(y.abs() as f64).max(floor)
        })
        .fold(0.0, f64::max)
}

fn max_rel_err_f64(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| (x - y).abs() / x.abs().max(y.abs()).max(1e-9))
        .fold(0.0, f64::max)
}

fn random_theta(c: usize, rng: &mut SeededRng) -> Theta {
    Theta::seeded(c, rng)
}

/// Runs the whole suite. Every check derives its generator from `seed`, so
/// two runs with the same seed produce identical reports.
pub fn run_all(seed: u64, fault: Fault) -> Vec<CheckReport> {
    vec![
        check_conv_linearity(seed, 20),
        check_conv_same_padding(),
        check_conv_translation_covariance(seed, 10),
        check_reshape_round_trips(seed, 10),
        check_resample_round_trip(seed, 10),
        check_pairwise_distance_agreement(seed, 10),
        check_ball_membership(seed, 20),
        check_epsilon_monotonicity(seed, 50),
        check_permutation_equivariance(seed, 50),
        check_oracle_equivalence(seed, 100),
        check_row_stochasticity(seed, 25, fault),
        check_residual_identity(seed, 10),
        check_epsilon_degeneracy(seed, 20),
        check_gradient_finite_difference(seed, 20),
        check_cluster_smoothing(seed, 10),
        check_neck_shape_law(seed),
        check_neck_mode_none_transparency(seed),
        check_neck_batch_independence(seed, 2),
        check_neck_epsilon_zero_collapse(seed, 2),
        check_collecting_set_width_law(seed),
        check_manet_structure_laws(seed),
        check_manet_residual_chain(seed),
        check_backbone_determinism(seed),
        check_hyt_round_trip(seed),
        check_preset_fidelity(),
    ]
}

/// With zero bias and no activation the block is linear:
/// `conv(a x + b y) = a conv(x) + b conv(y)`.
pub fn check_conv_linearity(seed: u64, instances: usize) -> CheckReport {
    let mut rng = seeded_rng(seed ^ 0x11);
    let mut max_err = 0.0f64;
    for _ in 0..instances {
        let c_in = rng.random_range(1..=6);
        let c_out = rng.random_range(1..=6);
        let k = [1, 3, 5][rng.random_range(0..3)];
        let (h, w) = (rng.random_range(2..=9), rng.random_range(2..=9));
        let p = ConvBlockParams::seeded(c_in, c_out, k, 1, 1, Activation::None, &mut rng).unwrap();
        let x = random_map(1, c_in, h, w, -1.0, 1.0, &mut rng).unwrap();
        let y = random_map(1, c_in, h, w, -1.0, 1.0, &mut rng).unwrap();
        let (a, b) = (
            rng.random::<f32>() * 3.0 - 1.5,
            rng.random::<f32>() * 3.0 - 1.5,
        );
        let mut combo = x.clone();
        for (dst, src) in combo.data_mut().iter_mut().zip(y.data()) {
            *dst = a * *dst + b * *src;
        }
        let lhs = conv2d_block(&combo, &p).unwrap();
        let cx = conv2d_block(&x, &p).unwrap();
        let cy = conv2d_block(&y, &p).unwrap();
        let rhs: Vec<f32> = cx
            .data()
            .iter()
            .zip(cy.data())
            .map(|(u, v)| a * u + b * v)
            .collect();
        max_err = max_err.max(max_rel_err_f32(lhs.data(), &rhs, 1.0));
    }
    CheckReport::new("conv_linearity", instances, max_err, 1e-5)
}

/// Stride-1 output spatial size equals the input size for every odd kernel;
/// stride-s output is `ceil(size / s)`.
pub fn check_conv_same_padding() -> CheckReport {
    let mut instances = 0;
    let mut ok = true;
    for &k in &[1usize, 3, 5, 7, 9] {
        for &(h, w) in &[(1usize, 1usize), (4, 7), (5, 5), (13, 3)] {
            for &s in &[1usize, 2, 3] {
                let p = ConvBlockParams::new(
                    1,
                    1,
                    k,
                    s,
                    1,
                    vec![0.0; k * k],
                    vec![0.0],
                    Activation::None,
                )
                .unwrap();
                let x = TensorMap::zeros(1, 1, h, w).unwrap();
                let y = conv2d_block(&x, &p).unwrap();
                ok &= y.height() == h.div_ceil(s) && y.width() == w.div_ceil(s);
                instances += 1;
            }
        }
    }
    CheckReport::exact("conv_same_padding_shape", instances, ok)
}

/// Shifting content inside a zero canvas shifts the stride-1 output by the
/// same offset wherever the receptive field stays inside the canvas.
pub fn check_conv_translation_covariance(seed: u64, instances: usize) -> CheckReport {
    let mut rng = seeded_rng(seed ^ 0x12);
    let mut ok = true;
    for _ in 0..instances {
        let c = rng.random_range(1..=3);
        let k = [3, 5][rng.random_range(0..2)];
        let (h, w) = (rng.random_range(3..=6), rng.random_range(3..=6));
        let p = ConvBlockParams::seeded(c, c, k, 1, 1, Activation::None, &mut rng).unwrap();
        let content = random_map(1, c, h, w, -1.0, 1.0, &mut rng).unwrap();
        let margin = k;
        let (ch, cw) = (h + 2 * margin + 1, w + 2 * margin);
        let place = |dy: usize| -> TensorMap {
            let mut canvas = TensorMap::zeros(1, c, ch, cw).unwrap();
            for ci in 0..c {
                for y in 0..h {
                    for x in 0..w {
                        let idx = ((ci * ch) + margin + dy + y) * cw + margin + x;
                        canvas.data_mut()[idx] = content.at(0, ci, y, x);
                    }
                }
            }
            canvas
        };
        let base = conv2d_block(&place(0), &p).unwrap();
        let shifted = conv2d_block(&place(1), &p).unwrap();
        let pad = (k - 1) / 2;
        for ci in 0..c {
            for y in pad..ch - pad - 1 {
                for x in 0..cw {
                    ok &= shifted.at(0, ci, y + 1, x) == base.at(0, ci, y, x);
                }
            }
        }
    }
    CheckReport::exact("conv_translation_covariance", instances, ok)
}

/// concat/split and grid/vertex round trips are bitwise identities.
pub fn check_reshape_round_trips(seed: u64, instances: usize) -> CheckReport {
    let mut rng = seeded_rng(seed ^ 0x13);
    let mut ok = true;
    for _ in 0..instances {
        let b = rng.random_range(1..=2);
        let (h, w) = (rng.random_range(1..=5), rng.random_range(1..=5));
        let sizes: Vec<usize> = (0..rng.random_range(1..=4))
            .map(|_| rng.random_range(1..=5))
            .collect();
        let total: usize = sizes.iter().sum();
        let x = random_map(b, total, h, w, -2.0, 2.0, &mut rng).unwrap();
        let parts = split_channels(&x, &sizes).unwrap();
        ok &= concat_channels(&parts).unwrap() == x;
        ok &= from_vertices(&to_vertices(&x)).unwrap() == x;
    }
    CheckReport::exact("reshape_round_trips", instances, ok)
}

/// Upsample-then-average round trips reproduce the source bitwise.
pub fn check_resample_round_trip(seed: u64, instances: usize) -> CheckReport {
    let mut rng = seeded_rng(seed ^ 0x14);
    let mut ok = true;
    for _ in 0..instances {
        let (h, w) = (rng.random_range(1..=6), rng.random_range(1..=6));
        let r = rng.random_range(1..=4);
        let x = random_map(1, rng.random_range(1..=4), h, w, -3.0, 3.0, &mut rng).unwrap();
        let up = resample(&x, h * r, w * r, ResampleMode::NearestUp).unwrap();
        ok &= resample(&up, h, w, ResampleMode::AvgDown).unwrap() == x;
    }
    CheckReport::exact("resample_round_trip", instances, ok)
}

/// Blocked pairwise distances agree with the naive double loop, are
/// symmetric and have a zero diagonal.
pub fn check_pairwise_distance_agreement(seed: u64, instances: usize) -> CheckReport {
    let mut rng = seeded_rng(seed ^ 0x15);
    let mut max_err = 0.0f64;
    let mut ok = true;
    for _ in 0..instances {
        let n = rng.random_range(1..=150);
        let c = rng.random_range(1..=24);
        let x = random_matrix(n, c, -2.0, 2.0, &mut rng).unwrap();
        let blocked = pairwise_sq_distances(&x);
        let naive = pairwise_sq_distances_naive(&x);
        max_err = max_err.max(max_rel_err_f32(&blocked, &naive, 1e-6));
        for i in 0..n {
            ok &= blocked[i * n + i] == 0.0;
            for j in 0..i {
                ok &= blocked[i * n + j] == blocked[j * n + i];
            }
        }
    }
    let mut report = CheckReport::new("pairwise_blocked_vs_naive", instances, max_err, 1e-5);
    report.passed &= ok;
    report
}

/// Epsilon balls keep their centre, produce one hyperedge per vertex, and
/// have positive degrees whose sums agree.
pub fn check_ball_membership(seed: u64, instances: usize) -> CheckReport {
    let mut rng = seeded_rng(seed ^ 0x16);
    let mut ok = true;
    for _ in 0..instances {
        let n = rng.random_range(1..=60);
        let c = rng.random_range(1..=8);
        let x = random_matrix(n, c, -1.0, 1.0, &mut rng).unwrap();
        let eps = rng.random::<f64>() * 2.0;
        let g = build_epsilon_ball_hypergraph(&x, &EpsilonBallParams::new(eps).unwrap()).unwrap();
        ok &= g.hyperedge_count() == n;
        for (v, members) in g.hyperedges().iter().enumerate() {
            ok &= members.binary_search(&v).is_ok();
        }
        let d = g.degrees();
        ok &=
            d.vertex_degrees.iter().all(|&x| x >= 1) && d.hyperedge_degrees.iter().all(|&x| x >= 1);
        ok &= d.vertex_degrees.iter().sum::<usize>() == d.hyperedge_degrees.iter().sum::<usize>();
    }
    CheckReport::exact("ball_center_membership", instances, ok)
}

/// Growing epsilon only grows each ball.
pub fn check_epsilon_monotonicity(seed: u64, instances: usize) -> CheckReport {
    let mut rng = seeded_rng(seed ^ 0x17);
    let mut ok = true;
    for _ in 0..instances {
        let n = rng.random_range(1..=40);
        let c = rng.random_range(1..=8);
        let x = random_matrix(n, c, -1.0, 1.0, &mut rng).unwrap();
        let mut eps = [rng.random::<f64>() * 2.0, rng.random::<f64>() * 2.0];
        eps.sort_by(f64::total_cmp);
        let small =
            build_epsilon_ball_hypergraph(&x, &EpsilonBallParams::new(eps[0]).unwrap()).unwrap();
        let large =
            build_epsilon_ball_hypergraph(&x, &EpsilonBallParams::new(eps[1]).unwrap()).unwrap();
        for (se, le) in small.hyperedges().iter().zip(large.hyperedges()) {
            ok &= se.iter().all(|v| le.binary_search(v).is_ok());
        }
    }
    CheckReport::exact("epsilon_monotonicity", instances, ok)
}

/// Permuting the vertices then building and convolving equals building and
/// convolving then permuting.
pub fn check_permutation_equivariance(seed: u64, instances: usize) -> CheckReport {
    let mut rng = seeded_rng(seed ^ 0x18);
    let mut max_err = 0.0f64;
    for _ in 0..instances {
        let n = rng.random_range(1..=32);
        let c = rng.random_range(1..=8);
        let x = random_matrix(n, c, -1.0, 1.0, &mut rng).unwrap();
        let eps = rng.random::<f64>() * 1.5;
        let theta = random_theta(c, &mut rng);

        let mut perm: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            perm.swap(i, rng.random_range(0..=i));
        }
        let mut permuted_data = vec![0.0f32; n * c];
        for (dst, &src) in perm.iter().enumerate() {
            permuted_data[dst * c..(dst + 1) * c].copy_from_slice(x.row(src));
        }
        let permuted = FeatureMatrix::new(n, c, permuted_data).unwrap();

        let params = EpsilonBallParams::new(eps).unwrap();
        let base = hyperconv(
            &x,
            &build_epsilon_ball_hypergraph(&x, &params).unwrap(),
            &theta,
        )
        .unwrap();
        let moved = hyperconv(
            &permuted,
            &build_epsilon_ball_hypergraph(&permuted, &params).unwrap(),
            &theta,
        )
        .unwrap();
        let mut base_permuted = vec![0.0f32; n * c];
        for (dst, &src) in perm.iter().enumerate() {
            base_permuted[dst * c..(dst + 1) * c].copy_from_slice(base.row(src));
        }
        max_err = max_err.max(max_rel_err_f32(moved.data(), &base_permuted, 1e-6));
    }
    CheckReport::new("permutation_equivariance", instances, max_err, 1e-6)
}

/// The sparse matrix-form convolution equals the literal two-stage loop.
pub fn check_oracle_equivalence(seed: u64, instances: usize) -> CheckReport {
    let mut rng = seeded_rng(seed ^ 0x19);
    let mut max_err = 0.0f64;
    for _ in 0..instances {
        let n = rng.random_range(1..=128);
        let c = rng.random_range(1..=32);
        let x = random_matrix(n, c, -1.0, 1.0, &mut rng).unwrap();
        let eps = rng.random::<f64>() * 1.5 * (c as f64).sqrt();
        let g = build_epsilon_ball_hypergraph(&x, &EpsilonBallParams::new(eps).unwrap()).unwrap();
        let theta = random_theta(c, &mut rng);
        let fast = hyperconv(&x, &g, &theta).unwrap();
        let slow = hyperconv_oracle(&x, &g, &theta).unwrap();
        max_err = max_err.max(max_rel_err_f32(fast.data(), slow.data(), 1e-6));
    }
    CheckReport::new("hyperconv_oracle_equivalence", instances, max_err, 1e-6)
}

/// Propagation-matrix rows sum to one, and constant inputs are mapped to
/// `x(I + theta)` row-for-row. The fault hook overstates hyperedge degrees
/// to prove the check can fail.
pub fn check_row_stochasticity(seed: u64, instances: usize, fault: Fault) -> CheckReport {
    let mut rng = seeded_rng(seed ^ 0x1a);
    let mut max_err = 0.0f64;
    for _ in 0..instances {
        let n = rng.random_range(1..=40);
        let c = rng.random_range(1..=6);
        let x = random_matrix(n, c, -1.0, 1.0, &mut rng).unwrap();
        let eps = rng.random::<f64>() * 2.0;
        let g = build_epsilon_ball_hypergraph(&x, &EpsilonBallParams::new(eps).unwrap()).unwrap();
        let p = match fault {
            Fault::None => propagation_matrix(&g),
            Fault::DegreeEPlusOne => faulted_propagation_matrix(&g),
        };
        for v in 0..n {
            let sum: f64 = p[v * n..(v + 1) * n].iter().sum();
            max_err = max_err.max((sum - 1.0).abs());
        }

        // Constant rows: output row must equal row + row * theta.
        let row: Vec<f32> = (0..c).map(|_| rng.random::<f32>() * 2.0 - 1.0).collect();
        let const_data: Vec<f32> = row.iter().copied().cycle().take(n * c).collect();
        let constant = FeatureMatrix::new(n, c, const_data).unwrap();
        let theta = random_theta(c, &mut rng);
        let out = hyperconv(&constant, &g, &theta).unwrap();
        let mut want = vec![0.0f32; c];
        for o in 0..c {
            let mut acc = row[o] as f64;
            for (k, &value) in row.iter().enumerate() {
                acc += value as f64 * theta.at(k, o) as f64;
            }
            want[o] = acc as f32;
        }
        for v in 0..n {
            max_err = max_err.max(max_rel_err_f32(out.row(v), &want, 1e-6));
        }
    }
    CheckReport::new("propagation_row_stochastic", instances, max_err, 1e-6)
}

fn faulted_propagation_matrix(g: &Hypergraph) -> Vec<f64> {
    let n = g.vertex_count();
    let mut p = vec![0.0f64; n * n];
    let memberships = g.vertex_memberships();
    for (v, edges) in memberships.iter().enumerate() {
        let row = &mut p[v * n..(v + 1) * n];
        for &e in edges {
            let members = &g.hyperedges()[e];
            let inv = 1.0 / (members.len() + 1) as f64;
            for &u in members {
                row[u] += inv;
            }
        }
        if !edges.is_empty() {
            let inv = 1.0 / edges.len() as f64;
            for value in row.iter_mut() {
                *value *= inv;
            }
        }
    }
    p
}

/// Zero theta returns the input bitwise.
pub fn check_residual_identity(seed: u64, instances: usize) -> CheckReport {
    let mut rng = seeded_rng(seed ^ 0x1b);
    let mut ok = true;
    for _ in 0..instances {
        let n = rng.random_range(1..=40);
        let c = rng.random_range(1..=8);
        let x = random_matrix(n, c, -1.0, 1.0, &mut rng).unwrap();
        let eps = rng.random::<f64>() * 2.0;
        let g = build_epsilon_ball_hypergraph(&x, &EpsilonBallParams::new(eps).unwrap()).unwrap();
        let out = hyperconv(&x, &g, &Theta::zeros(c)).unwrap();
        ok &= out.data() == x.data();
    }
    CheckReport::exact("residual_identity", instances, ok)
}

/// `eps = 0` gives the identity incidence pattern and output `X + X theta`;
/// `eps` beyond the data diameter gives the full hypergraph and global-mean
/// propagation.
pub fn check_epsilon_degeneracy(seed: u64, instances: usize) -> CheckReport {
    let mut rng = seeded_rng(seed ^ 0x1c);
    let mut max_err = 0.0f64;
    let mut ok = true;
    for _ in 0..instances {
        let n = rng.random_range(1..=32);
        let c = rng.random_range(1..=8);
        let x = random_matrix(n, c, -1.0, 1.0, &mut rng).unwrap();
        let theta = random_theta(c, &mut rng);

        let g0 = build_epsilon_ball_hypergraph(&x, &EpsilonBallParams::new(0.0).unwrap()).unwrap();
        ok &= g0.hyperedges().iter().enumerate().all(|(v, e)| e == &[v]);
        let out = hyperconv(&x, &g0, &theta).unwrap();
        let mut want = vec![0.0f32; n * c];
        for v in 0..n {
            for o in 0..c {
                let mut acc = x.row(v)[o] as f64;
                for (k, &value) in x.row(v).iter().enumerate() {
                    acc += value as f64 * theta.at(k, o) as f64;
                }
                want[v * c + o] = acc as f32;
            }
        }
        max_err = max_err.max(max_rel_err_f32(out.data(), &want, 1e-6));

        let diameter = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .map(|(i, j)| {
                x.row(i)
                    .iter()
                    .zip(x.row(j))
                    .map(|(a, b)| ((a - b) as f64).powi(2))
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(0.0, f64::max);
        let g_full =
            build_epsilon_ball_hypergraph(&x, &EpsilonBallParams::new(diameter + 1.0).unwrap())
                .unwrap();
        ok &= g_full.hyperedges().iter().all(|e| e.len() == n);
        let out = hyperconv(&x, &g_full, &theta).unwrap();
        let mut mean = vec![0.0f64; c];
        for v in 0..n {
            for (acc, &value) in mean.iter_mut().zip(x.row(v)) {
                *acc += value as f64;
            }
        }
        for value in mean.iter_mut() {
            *value /= n as f64;
        }
        for v in 0..n {
            let mut want_row = vec![0.0f32; c];
            for (o, dst) in want_row.iter_mut().enumerate() {
                let mut acc = x.row(v)[o] as f64;
                for (k, &m) in mean.iter().enumerate() {
                    acc += m * theta.at(k, o) as f64;
                }
                *dst = acc as f32;
            }
            max_err = max_err.max(max_rel_err_f32(out.row(v), &want_row, 1e-6));
        }
    }
    let mut report = CheckReport::new("epsilon_degeneracy", instances, max_err, 1e-6);
    report.passed &= ok;
    report
}

/// Analytic theta gradient against central finite differences at 64-bit.
/// The loss is linear in theta, so differences are exact up to roundoff.
pub fn check_gradient_finite_difference(seed: u64, instances: usize) -> CheckReport {
    let mut rng = seeded_rng(seed ^ 0x1d);
    let mut max_err = 0.0f64;
    let step = 1e-5;
    for _ in 0..instances {
        let n = rng.random_range(2..=40);
        let c = rng.random_range(1..=6);
        let data: Vec<f64> = (0..n * c)
            .map(|_| rng.random::<f64>() * 2.0 - 1.0)
            .collect();
        let x = FeatureMatrix::new(n, c, data).unwrap();
        let eps = rng.random::<f64>() * 1.5;
        let g = build_epsilon_ball_hypergraph(&x, &EpsilonBallParams::new(eps).unwrap()).unwrap();
        let up_data: Vec<f64> = (0..n * c)
            .map(|_| rng.random::<f64>() * 2.0 - 1.0)
            .collect();
        let upstream = FeatureMatrix::new(n, c, up_data).unwrap();
        let theta0: Vec<f64> = (0..c * c).map(|_| rng.random::<f64>() - 0.5).collect();

        let analytic = hyperconv_grad_theta(&x, &g, &upstream).unwrap();
        let loss = |theta_data: Vec<f64>| -> f64 {
            let theta = Theta::new(c, c, theta_data).unwrap();
            let out = hyperconv(&x, &g, &theta).unwrap();
            out.data()
                .iter()
                .zip(upstream.data())
                .map(|(o, u)| o * u)
                .sum()
        };
        for idx in 0..c * c {
            let mut plus = theta0.clone();
            plus[idx] += step;
            let mut minus = theta0.clone();
            minus[idx] -= step;
            let fd = (loss(plus) - loss(minus)) / (2.0 * step);
            max_err = max_err.max(max_rel_err_f64(&[analytic.data()[idx]], &[fd]));
        }
    }
    CheckReport::new("gradient_finite_difference", instances, max_err, 1e-4)
}

/// On well-separated clusters, propagation strictly reduces within-cluster
/// variance.
pub fn check_cluster_smoothing(seed: u64, instances: usize) -> CheckReport {
    let mut ok = true;
    for i in 0..instances {
        let spec = ClusterSpec {
            seed: seed.wrapping_add(i as u64),
            ..ClusterSpec::default()
        };
        let points = synthesize_clusters(&spec).unwrap();
        let g =
            build_epsilon_ball_hypergraph(&points.features, &EpsilonBallParams::new(6.0).unwrap())
                .unwrap();
        let c = points.features.channels();
        let px = crate::hypergraph::propagate_f64(&points.features, &g);
        let px_f32: Vec<f32> = px.iter().map(|&v| v as f32).collect();
        let propagated = FeatureMatrix::new(points.features.vertices(), c, px_f32).unwrap();
        let before = within_cluster_variance(&points.features, &points.labels);
        let after = within_cluster_variance(&propagated, &points.labels);
        ok &= after < before;
    }
    CheckReport::exact("cluster_smoothing", instances, ok)
}

/// Outputs sit at strides 8/16/32 with the preset widths for every preset
/// and input size.
pub fn check_neck_shape_law(seed: u64) -> CheckReport {
    let mut rng = seeded_rng(seed ^ 0x1e);
    let mut instances = 0;
    let mut ok = true;
    for preset in ScalePreset::ALL {
        for &size in &[64usize, 96] {
            let pyr = FeaturePyramid::seeded(preset, 1, size, size, &mut rng).unwrap();
            let neck = Neck::seeded(NeckConfig::for_scale(preset), preset, &mut rng).unwrap();
            let out = neck.forward(&pyr).unwrap();
            let widths = preset.channel_widths();
            ok &= out.n3.shape() == (1, widths[2], size / 8, size / 8);
            ok &= out.n4.shape() == (1, widths[3], size / 16, size / 16);
            ok &= out.n5.shape() == (1, widths[4], size / 32, size / 32);
            instances += 1;
        }
    }
    CheckReport::exact("neck_shape_law", instances, ok)
}

/// Mode `none` output is bitwise identical to running the pipeline with the
/// propagation stage deleted.
pub fn check_neck_mode_none_transparency(seed: u64) -> CheckReport {
    let mut rng = seeded_rng(seed ^ 0x1f);
    let mut instances = 0;
    let mut ok = true;
    for preset in [ScalePreset::N, ScalePreset::S] {
        let mut config = NeckConfig::for_scale(preset);
        config.mode = CorrelationMode::None;
        let neck = Neck::seeded(config, preset, &mut rng).unwrap();
        let pyr = FeaturePyramid::seeded(preset, 1, 64, 64, &mut rng).unwrap();
        let full = neck.forward(&pyr).unwrap();
        let collected = neck.semantic_collect(&pyr).unwrap();
        let (s3, s4, s5) = neck.semantic_scatter(&collected, &pyr).unwrap();
        let skipped = neck.bottom_up(s3, s4, s5).unwrap();
        ok &= full.n3 == skipped.n3 && full.n4 == skipped.n4 && full.n5 == skipped.n5;
        instances += 1;
    }
    CheckReport::exact("neck_mode_none_transparency", instances, ok)
}

/// Under per-image pooling a batch equals its images run alone and stacked.
pub fn check_neck_batch_independence(seed: u64, instances: usize) -> CheckReport {
    let mut rng = seeded_rng(seed ^ 0x20);
    let mut max_err = 0.0f64;
    for _ in 0..instances {
        let preset = ScalePreset::N;
        let mut config = NeckConfig::for_scale(preset);
        config.pooling = Pooling::PerImage;
        let neck = Neck::seeded(config, preset, &mut rng).unwrap();
        let pyr = FeaturePyramid::seeded(preset, 2, 64, 64, &mut rng).unwrap();
        let batched = neck.forward(&pyr).unwrap();
        for b in 0..2 {
            let single = neck.forward(&pyr.image(b).unwrap()).unwrap();
            max_err = max_err.max(max_rel_err_f32(
                batched.n3.image(b).unwrap().data(),
                single.n3.data(),
                1e-6,
            ));
            max_err = max_err.max(max_rel_err_f32(
                batched.n4.image(b).unwrap().data(),
                single.n4.data(),
                1e-6,
            ));
            max_err = max_err.max(max_rel_err_f32(
                batched.n5.image(b).unwrap().data(),
                single.n5.data(),
                1e-6,
            ));
        }
    }
    CheckReport::new("neck_batch_independence", instances, max_err, 1e-6)
}

/// High-order mode at `eps = 0` equals mode `none` with one extra
/// `X + X theta` stage on the point set.
pub fn check_neck_epsilon_zero_collapse(seed: u64, instances: usize) -> CheckReport {
    let mut rng = seeded_rng(seed ^ 0x21);
    let mut max_err = 0.0f64;
    for _ in 0..instances {
        let preset = ScalePreset::N;
        let mut config = NeckConfig::for_scale(preset);
        config.epsilon = 0.0;
        config.mode = CorrelationMode::HighOrder;
        let neck = Neck::seeded(config, preset, &mut rng).unwrap();
        let pyr = FeaturePyramid::seeded(preset, 1, 64, 64, &mut rng).unwrap();
        let high = neck.forward(&pyr).unwrap();

        let collected = neck.semantic_collect(&pyr).unwrap();
        let theta = neck.weights().theta();
        let c = collected.channels();
        let mut linear = collected.clone();
        for v in 0..collected.vertices() {
            let row = collected.row(v);
            let out_row = &mut linear.data_mut()[v * c..(v + 1) * c];
            for o in 0..c {
                let mut acc = row[o] as f64;
                for (k, &value) in row.iter().enumerate() {
                    acc += value as f64 * theta.at(k, o) as f64;
                }
                out_row[o] = acc as f32;
            }
        }
        let (s3, s4, s5) = neck.semantic_scatter(&linear, &pyr).unwrap();
        let manual = neck.bottom_up(s3, s4, s5).unwrap();
        max_err = max_err.max(max_rel_err_f32(high.n3.data(), manual.n3.data(), 1.0));
        max_err = max_err.max(max_rel_err_f32(high.n4.data(), manual.n4.data(), 1.0));
        max_err = max_err.max(max_rel_err_f32(high.n5.data(), manual.n5.data(), 1.0));
    }
    CheckReport::new("neck_epsilon_zero_collapse", instances, max_err, 1e-6)
}

/// Changing the collecting set changes only the fuse conv's input width;
/// every downstream shape is unchanged.
pub fn check_collecting_set_width_law(seed: u64) -> CheckReport {
    let mut rng = seeded_rng(seed ^ 0x22);
    let mut instances = 0;
    let mut ok = true;
    for preset in ScalePreset::ALL {
        let widths = preset.channel_widths();
        let full = NeckConfig::for_scale(preset);
        let mut top3 = full.clone();
        top3.collecting_set = vec![
            crate::neck::Level::B3,
            crate::neck::Level::B4,
            crate::neck::Level::B5,
        ];
        let want_full: usize = widths.iter().sum();
        let want_top3: usize = widths[2..].iter().sum();
        let neck_full = Neck::seeded(full, preset, &mut rng).unwrap();
        let neck_top3 = Neck::seeded(top3, preset, &mut rng).unwrap();
        ok &= neck_full.weights().fuse().in_channels() == want_full;
        ok &= neck_top3.weights().fuse().in_channels() == want_top3;
        let pyr = FeaturePyramid::seeded(preset, 1, 64, 64, &mut rng).unwrap();
        let a = neck_full.forward(&pyr).unwrap();
        let b = neck_top3.forward(&pyr).unwrap();
        ok &= a.n3.shape() == b.n3.shape()
            && a.n4.shape() == b.n4.shape()
            && a.n5.shape() == b.n5.shape();
        instances += 1;
    }
    CheckReport::exact("collecting_set_width_law", instances, ok)
}

/// Block output width is `2c` regardless of depth; the fuse conv consumes
/// `(4+n)c`; spatial size is preserved.
pub fn check_manet_structure_laws(seed: u64) -> CheckReport {
    let mut rng = seeded_rng(seed ^ 0x23);
    let mut instances = 0;
    let mut ok = true;
    for n in 1..=3 {
        let c = 4;
        let p = crate::backbone::ManetParams::seeded(2 * c, c, n, 3, &mut rng).unwrap();
        ok &= p.out_channels() == 2 * c;
        ok &= p.conv_o().in_channels() == (4 + n) * c;
        let x = random_map(1, 2 * c, 5, 7, -1.0, 1.0, &mut rng).unwrap();
        let y = crate::backbone::manet_block(&x, &p).unwrap();
        ok &= y.shape() == (1, 2 * c, 5, 7);
        instances += 1;
    }
    CheckReport::exact("manet_structure_laws", instances, ok)
}

/// Zeroing every chain unit reduces the chain to copies of the trunk
/// branch and the block stays well-formed.
pub fn check_manet_residual_chain(seed: u64) -> CheckReport {
    let mut rng = seeded_rng(seed ^ 0x24);
    let c = 3;
    let n = 2;
    let act = Activation::None;
    let zero_unit = || {
        crate::backbone::ResidualUnit::new(
            ConvBlockParams::new(c, c, 3, 1, 1, vec![0.0; c * c * 9], vec![0.0; c], act).unwrap(),
            ConvBlockParams::new(c, c, 3, 1, 1, vec![0.0; c * c * 9], vec![0.0; c], act).unwrap(),
        )
        .unwrap()
    };
    let p = crate::backbone::ManetParams::new(
        ConvBlockParams::seeded(2 * c, 2 * c, 1, 1, 1, act, &mut rng).unwrap(),
        ConvBlockParams::seeded(2 * c, c, 1, 1, 1, act, &mut rng).unwrap(),
        ConvBlockParams::seeded(2 * c, c, 1, 1, 1, act, &mut rng).unwrap(),
        ConvBlockParams::seeded(c, c, 3, 1, c, act, &mut rng).unwrap(),
        ConvBlockParams::seeded(c, c, 1, 1, 1, act, &mut rng).unwrap(),
        vec![zero_unit(), zero_unit()],
        ConvBlockParams::seeded((4 + n) * c, 2 * c, 1, 1, 1, act, &mut rng).unwrap(),
    )
    .unwrap();
    let x = random_map(1, 2 * c, 4, 4, -1.0, 1.0, &mut rng).unwrap();
    let got = crate::backbone::manet_block(&x, &p).unwrap();

    let (conv1, conv2, conv3, dw, pw, _, conv_o) = p.parts();
    let x_mid = conv2d_block(&x, conv1).unwrap();
    let x1 = conv2d_block(&x_mid, conv2).unwrap();
    let x2 = crate::tensor::dsconv_block(&conv2d_block(&x_mid, conv3).unwrap(), dw, pw).unwrap();
    let split = split_channels(&x_mid, &[c, c]).unwrap();
    let branches = vec![
        x1,
        x2,
        split[0].clone(),
        split[1].clone(),
        split[1].clone(),
        split[1].clone(),
    ];
    let want = conv2d_block(&concat_channels(&branches).unwrap(), conv_o).unwrap();
    CheckReport::exact("manet_residual_chain", 1, got == want)
}

/// Identical seeds reproduce the pyramid bitwise.
pub fn check_backbone_determinism(seed: u64) -> CheckReport {
    let image = random_map(1, 3, 64, 64, 0.0, 1.0, &mut seeded_rng(seed ^ 0x25)).unwrap();
    let run = || {
        let weights = BackboneWeights::seeded(
            BackboneConfig::new(ScalePreset::N),
            &mut seeded_rng(seed ^ 0x26),
        )
        .unwrap();
        backbone_forward(&image, &weights).unwrap()
    };
    let a = run();
    let b = run();
    let ok = (0..5).all(|i| a.level(i) == b.level(i));
    CheckReport::exact("backbone_determinism", 1, ok)
}

/// Binary tensor files round-trip bitwise for every rank in use, and the
/// header matches the format definition byte for byte.
pub fn check_hyt_round_trip(seed: u64) -> CheckReport {
    let mut rng = seeded_rng(seed ^ 0x27);
    let mut ok = true;
    let mut instances = 0;
    for dims in [vec![7u32], vec![4, 6], vec![2, 3, 4, 5]] {
        let count = dims.iter().product::<u32>() as usize;
        let data: Vec<f32> = (0..count)
            .map(|_| rng.random::<f32>() * 2e3 - 1e3)
            .collect();
        let t = RawTensor::new(dims, data).unwrap();
        let bytes = tensor_to_bytes(&t);
        ok &= &bytes[0..4] == b"HYT1" && bytes[4] == 0 && bytes[6] == 0 && bytes[7] == 0;
        ok &= tensor_from_bytes(&bytes).unwrap() == t;
        instances += 1;
    }
    CheckReport::exact("hyt_round_trip", instances, ok)
}

/// Preset tables match their definitions.
pub fn check_preset_fidelity() -> CheckReport {
    let eps: Vec<f64> = ScalePreset::ALL.iter().map(|p| p.epsilon()).collect();
    let hyper: Vec<usize> = ScalePreset::ALL
        .iter()
        .map(|p| p.hyper_channels())
        .collect();
    let mut ok = eps == [6.0, 8.0, 10.0, 10.0] && hyper == [128, 256, 384, 512];
    ok &= ScalePreset::N.channel_widths() == [16, 32, 64, 128, 256];
    ok &= ScalePreset::S.channel_widths() == [32, 64, 128, 256, 512];
    ok &= ScalePreset::M.channel_widths() == [48, 96, 192, 384, 576];
    ok &= ScalePreset::L.channel_widths() == [64, 128, 256, 512, 512];
    ok &= ScalePreset::N.manet_depths() == [1, 2, 2, 1]
        && ScalePreset::S.manet_depths() == [1, 2, 2, 1];
    ok &= ScalePreset::M.manet_depths() == [2, 4, 4, 2]
        && ScalePreset::L.manet_depths() == [3, 6, 6, 3];
    ok &= ScalePreset::ALL
        .iter()
        .all(|p| p.manet_kernels() == [3, 5, 5, 3]);
    CheckReport::exact("preset_fidelity", 1, ok)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_suite_passes_on_a_fresh_build() {
        let reports = run_all(42, Fault::None);
        assert_eq!(reports.len(), 25);
        for report in &reports {
            assert!(
                report.passed,
                "check {} failed with max error {:.3e}",
                report.name, report.max_error
            );
        }
    }

    #[test]
    fn degree_fault_injection_fails_row_stochasticity() {
        let report = check_row_stochasticity(42, 5, Fault::DegreeEPlusOne);
        assert!(!report.passed);
        let clean = check_row_stochasticity(42, 5, Fault::None);
        assert!(clean.passed);
    }

    #[test]
    fn fault_parsing() {
        assert_eq!(Fault::parse("none").unwrap(), Fault::None);
        assert_eq!(Fault::parse("de_plus_one").unwrap(), Fault::DegreeEPlusOne);
        assert!(Fault::parse("bogus").is_err());
    }
}
