//! `fit`: gradient descent on the hypergraph convolution's mixing matrix
//! against per-cluster targets, reporting the loss trace as CSV
//! (`iteration,loss`). A diverging run still prints its trace but exits
//! non-zero.

use super::ablate::resolve_cluster_spec;
use super::Params;
use crate::{CmdError, CmdResult};
use clap::Args;
use hyperneck_core::fitting::{fit_theta, FitSpec};
use std::io::Write;
use std::path::PathBuf;

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Optional key=value config file (keys: clusters, points_per_cluster,
    /// dim, separation, spread, epsilon, step, iterations, seed, out)
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub clusters: Option<usize>,
    #[arg(long)]
    pub points_per_cluster: Option<usize>,
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub separation: Option<f64>,
    #[arg(long)]
    pub spread: Option<f64>,
    /// Ball threshold for structure construction
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Gradient-descent step size
    #[arg(long)]
    pub step: Option<f64>,
    /// Number of descent steps
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Also write the CSV to `<out>/fit.csv`
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run(args: &FitArgs, out: &mut impl Write) -> CmdResult<()> {
    let mut keys: Vec<&str> = super::ablate::CLUSTER_KEYS.to_vec();
    keys.extend(["epsilon", "step", "iterations", "out"]);
    let params = Params::from_config(args.config.as_deref(), &keys)?;
    let cluster = resolve_cluster_spec(
        &params,
        &args.clusters,
        &args.points_per_cluster,
        &args.dim,
        &args.separation,
        &args.spread,
        &args.seed,
    )?;
    let defaults = FitSpec::default();
    let spec = FitSpec {
        cluster,
        epsilon: params.resolve("epsilon", &args.epsilon, defaults.epsilon)?,
        step: params.resolve("step", &args.step, defaults.step)?,
        iterations: params.resolve("iterations", &args.iterations, defaults.iterations)?,
    };

    let outcome = fit_theta(&spec)?;
    let mut csv = String::from("iteration,loss\n");
    for (i, loss) in outcome.losses.iter().enumerate() {
        csv.push_str(&format!("{i},{loss:e}\n"));
    }
    write!(out, "{csv}")?;
    if let Some(dir) = &args.out {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("fit.csv"), csv)?;
    }
    if outcome.diverged {
        return Err(CmdError::CheckFailure(format!(
            "descent diverged after {} steps at step size {}",
            outcome.losses.len() - 1,
            spec.step
        )));
    }
    Ok(())
}
