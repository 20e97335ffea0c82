//! `hypergraph`: builds an epsilon-ball hypergraph from a rank-2 `HYT1`
//! feature matrix, prints its degree statistics and optionally writes the
//! line-oriented text form.

use super::{fmt_f64, Params};
use crate::{CmdError, CmdResult};
use clap::Args;
use hyperneck_core::hypergraph::{build_epsilon_ball_hypergraph, EpsilonBallParams};
use hyperneck_core::io::read_tensor;
use std::io::Write;
use std::path::PathBuf;

#[derive(Debug, Args)]
pub struct HypergraphArgs {
    /// Optional key=value config file (keys: input, epsilon, out)
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Rank-2 HYT1 tensor holding the V x C vertex features
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Ball threshold
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Write the hypergraph text form to `<out>/hypergraph.txt`
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn summary(values: &[usize]) -> String {
    let min = values.iter().min().copied().unwrap_or(0);
    let max = values.iter().max().copied().unwrap_or(0);
    let mean = values.iter().sum::<usize>() as f64 / values.len().max(1) as f64;
    format!("min={min} mean={} max={max}", fmt_f64(mean))
}

pub fn run(args: &HypergraphArgs, out: &mut impl Write) -> CmdResult<()> {
    let params = Params::from_config(args.config.as_deref(), &["input", "epsilon", "out"])?;
    let input = match &args.input {
        Some(path) => path.clone(),
        None => params.get("input").map(PathBuf::from).ok_or_else(|| {
            CmdError::BadInput("hypergraph needs --input (a rank-2 HYT1 file)".into())
        })?,
    };
    let epsilon = params.resolve("epsilon", &args.epsilon, 1.0f64)?;

    let features = read_tensor(&input)?.to_matrix()?;
    let graph = build_epsilon_ball_hypergraph(&features, &EpsilonBallParams::new(epsilon)?)?;
    let degrees = graph.degrees();
    writeln!(
        out,
        "vertices={} channels={} epsilon={epsilon}",
        features.vertices(),
        features.channels()
    )?;
    writeln!(
        out,
        "hyperedges={} incidences={}",
        graph.hyperedge_count(),
        degrees.incidences()
    )?;
    writeln!(out, "vertex_degree {}", summary(&degrees.vertex_degrees))?;
    writeln!(
        out,
        "hyperedge_degree {}",
        summary(&degrees.hyperedge_degrees)
    )?;
    if let Some(dir) = &args.out {
        std::fs::create_dir_all(dir)?;
        let path = dir.join("hypergraph.txt");
        std::fs::write(&path, graph.to_text())?;
        writeln!(out, "written: {}", path.display())?;
    }
    Ok(())
}
