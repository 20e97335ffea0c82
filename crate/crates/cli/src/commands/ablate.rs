//! `ablate`: synthesises well-separated clusters and reports, per
//! correlation mode, the within-cluster variance of the propagation output
//! relative to the raw points (CSV `mode,variance_ratio`).

use super::Params;
use crate::CmdResult;
use clap::Args;
use hyperneck_core::synth::{ablation_variance_ratios, ClusterSpec};
use std::io::Write;
use std::path::PathBuf;

pub const CLUSTER_KEYS: [&str; 6] = [
    "clusters",
    "points_per_cluster",
    "dim",
    "separation",
    "spread",
    "seed",
];

#[derive(Debug, Args)]
pub struct AblateArgs {
    /// Optional key=value config file (keys: clusters, points_per_cluster,
    /// dim, separation, spread, epsilon, seed, out)
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Number of clusters
    #[arg(long)]
    pub clusters: Option<usize>,
    #[arg(long)]
    pub points_per_cluster: Option<usize>,
    /// Feature dimensionality
    #[arg(long)]
    pub dim: Option<usize>,
    /// Distance of each cluster centre from the origin (along its own axis)
    #[arg(long)]
    pub separation: Option<f64>,
    /// Per-coordinate noise half-width around each centre
    #[arg(long)]
    pub spread: Option<f64>,
    /// Ball threshold used by the low- and high-order modes
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Also write the CSV to `<out>/ablate.csv`
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub(crate) fn resolve_cluster_spec(
    params: &Params,
    clusters: &Option<usize>,
    points_per_cluster: &Option<usize>,
    dim: &Option<usize>,
    separation: &Option<f64>,
    spread: &Option<f64>,
    seed: &Option<u64>,
) -> CmdResult<ClusterSpec> {
    let defaults = ClusterSpec::default();
    Ok(ClusterSpec {
        k_clusters: params.resolve("clusters", clusters, defaults.k_clusters)?,
        points_per_cluster: params.resolve(
            "points_per_cluster",
            points_per_cluster,
            defaults.points_per_cluster,
        )?,
        dim: params.resolve("dim", dim, defaults.dim)?,
        center_separation: params.resolve("separation", separation, defaults.center_separation)?,
        intra_spread: params.resolve("spread", spread, defaults.intra_spread)?,
        seed: params.resolve("seed", seed, defaults.seed)?,
    })
}

pub fn run(args: &AblateArgs, out: &mut impl Write) -> CmdResult<()> {
    let mut keys: Vec<&str> = CLUSTER_KEYS.to_vec();
    keys.extend(["epsilon", "out"]);
    let params = Params::from_config(args.config.as_deref(), &keys)?;
    let spec = resolve_cluster_spec(
        &params,
        &args.clusters,
        &args.points_per_cluster,
        &args.dim,
        &args.separation,
        &args.spread,
        &args.seed,
    )?;
    let epsilon = params.resolve("epsilon", &args.epsilon, 6.0f64)?;

    let rows = ablation_variance_ratios(&spec, epsilon)?;
    let mut csv = String::from("mode,variance_ratio\n");
    for row in rows {
        csv.push_str(&format!("{},{}\n", row.mode, row.variance_ratio));
    }
    write!(out, "{csv}")?;
    if let Some(dir) = &args.out {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("ablate.csv"), csv)?;
    }
    Ok(())
}
