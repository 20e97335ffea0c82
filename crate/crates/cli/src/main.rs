use clap::{Parser, Subcommand};
use hyperneck_cli::commands::{ablate, bench, demo, fit, hypergraph, verify};
use hyperneck_cli::{exit_code, CmdResult};
use std::process::ExitCode;

/// Hypergraph-computation harness: verification suite, pipeline demo,
/// kernel benchmarks, correlation ablation and mixing-matrix fitting.
///
/// Exit codes: 0 success, 1 check failure, 2 bad input.
#[derive(Parser)]
#[command(name = "hyperneck", version, about, long_about = None)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the invariant verification suite (exit 1 on any failed check)
    Verify(verify::VerifyArgs),
    /// Run backbone + neck, print shapes/stats, export heatmaps
    Demo(demo::DemoArgs),
    /// Time the distance/build/convolution kernels, emit CSV
    Bench(bench::BenchArgs),
    /// Within-cluster variance ablation across correlation modes, emit CSV
    Ablate(ablate::AblateArgs),
    /// Fit the mixing matrix by gradient descent, emit a loss-trace CSV
    Fit(fit::FitArgs),
    /// Build an epsilon-ball hypergraph from an HYT1 matrix, print stats
    Hypergraph(hypergraph::HypergraphArgs),
}

fn run(cli: &Cli) -> CmdResult<()> {
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    match &cli.command {
        Command::Verify(args) => verify::run(args, &mut out),
        Command::Demo(args) => demo::run(args, &mut out),
        Command::Bench(args) => bench::run(args, &mut out),
        Command::Ablate(args) => ablate::run(args, &mut out),
        Command::Fit(args) => fit::run(args, &mut out),
        Command::Hypergraph(args) => hypergraph::run(args, &mut out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = run(&cli);
    if let Err(e) = &result {
        eprintln!("error: {e}");
    }
    ExitCode::from(exit_code(&result))
}
