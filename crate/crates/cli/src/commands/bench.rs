//! `bench`: wall-clock timing of the distance, construction and
//! convolution kernels, emitted as CSV (`kernel,vertices,channels,ns_per_op`).
//! Timing values are machine-dependent; the schema is the contract.

use super::Params;
use crate::{CmdError, CmdResult};
use clap::Args;
use hyperneck_core::hypergraph::{
    build_epsilon_ball_hypergraph, hyperconv, pairwise_sq_distances, pairwise_sq_distances_naive,
    EpsilonBallParams, Theta,
};
use hyperneck_core::init::{random_matrix, seeded_rng};
use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Optional key=value config file (keys: vertices, channels, reps,
    /// epsilon, seed, out)
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Comma-separated vertex counts, e.g. 256,1024,4096
    #[arg(long)]
    pub vertices: Option<String>,
    /// Channel width of the benchmark point sets
    #[arg(long)]
    pub channels: Option<usize>,
    /// Repetitions per kernel; the reported time is the mean
    #[arg(long)]
    pub reps: Option<usize>,
    /// Ball threshold for the construction and convolution kernels
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Also write the CSV to `<out>/bench.csv`
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn time_ns(reps: usize, mut f: impl FnMut()) -> u128 {
    let start = Instant::now();
    for _ in 0..reps {
        f();
    }
    start.elapsed().as_nanos() / reps as u128
}

pub fn run(args: &BenchArgs, out: &mut impl Write) -> CmdResult<()> {
    let params = Params::from_config(
        args.config.as_deref(),
        &["vertices", "channels", "reps", "epsilon", "seed", "out"],
    )?;
    let vertices_text = params.resolve("vertices", &args.vertices, "256,1024".to_string())?;
    let vertex_counts: Vec<usize> = vertices_text
        .split(',')
        .map(|t| {
            t.trim()
                .parse::<usize>()
                .map_err(|_| CmdError::BadInput(format!("bad vertex count: {t}")))
        })
        .collect::<CmdResult<_>>()?;
    let channels = params.resolve("channels", &args.channels, 256usize)?;
    let reps = params.resolve("reps", &args.reps, 3usize)?;
    let epsilon = params.resolve("epsilon", &args.epsilon, 6.0f64)?;
    let seed = params.resolve("seed", &args.seed, 42u64)?;
    if reps == 0 || channels == 0 || vertex_counts.is_empty() || vertex_counts.contains(&0) {
        return Err(CmdError::BadInput(
            "bench needs reps, channels and vertex counts >= 1".into(),
        ));
    }
    let ball = EpsilonBallParams::new(epsilon)?;

    let mut csv = String::from("kernel,vertices,channels,ns_per_op\n");
    for &v in &vertex_counts {
        let mut rng = seeded_rng(seed);
        let x = random_matrix(v, channels, 0.0, 1.0, &mut rng)?;
        let naive = time_ns(reps, || {
            std::hint::black_box(pairwise_sq_distances_naive(std::hint::black_box(&x)));
        });
        csv.push_str(&format!("pairwise_naive,{v},{channels},{naive}\n"));
        let blocked = time_ns(reps, || {
            std::hint::black_box(pairwise_sq_distances(std::hint::black_box(&x)));
        });
        csv.push_str(&format!("pairwise_blocked,{v},{channels},{blocked}\n"));
        let build = time_ns(reps, || {
            std::hint::black_box(
                build_epsilon_ball_hypergraph(std::hint::black_box(&x), &ball).unwrap(),
            );
        });
        csv.push_str(&format!("hypergraph_build,{v},{channels},{build}\n"));
        let graph = build_epsilon_ball_hypergraph(&x, &ball)?;
        let theta = Theta::identity(channels);
        let conv = time_ns(reps, || {
            std::hint::black_box(hyperconv(std::hint::black_box(&x), &graph, &theta).unwrap());
        });
        csv.push_str(&format!("hyperconv,{v},{channels},{conv}\n"));
    }
    write!(out, "{csv}")?;
    if let Some(dir) = &args.out {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("bench.csv"), csv)?;
    }
    Ok(())
}
