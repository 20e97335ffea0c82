//! `verify`: runs the full invariant suite and reports one line per check.
//! Exit status is the contract: zero only when every check passes.

use super::Params;
use crate::{CmdError, CmdResult};
use clap::Args;
use hyperneck_core::checks::{run_all, Fault};
use std::io::Write;
use std::path::PathBuf;

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Optional key=value config file (keys: seed, fault)
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Seed for every randomised check
    #[arg(long)]
    pub seed: Option<u64>,
    /// Fault injection for negative-control runs: none | de_plus_one
    #[arg(long)]
    pub fault: Option<String>,
}

pub fn run(args: &VerifyArgs, out: &mut impl Write) -> CmdResult<()> {
    let params = Params::from_config(args.config.as_deref(), &["seed", "fault"])?;
    let seed = params.resolve("seed", &args.seed, 42u64)?;
    let fault_text = params.resolve("fault", &args.fault, "none".to_string())?;
    let fault = Fault::parse(&fault_text)?;

    writeln!(out, "verify seed={seed} fault={fault_text}")?;
    let reports = run_all(seed, fault);
    let total = reports.len();
    let mut passed = 0;
    for (i, report) in reports.iter().enumerate() {
        writeln!(
            out,
            "  [{:>2}/{total}] {:<32} instances={:<4} max_err={:<9} {}",
            i + 1,
            report.name,
            report.instances,
            format!("{:.1e}", report.max_error),
            if report.passed { "PASS" } else { "FAIL" }
        )?;
        if report.passed {
            passed += 1;
        }
    }
    if passed == total {
        writeln!(out, "verify: PASS ({passed}/{total} checks)")?;
        Ok(())
    } else {
        writeln!(out, "verify: FAIL ({passed}/{total} checks)")?;
        Err(CmdError::CheckFailure(format!(
            "{} of {total} checks failed",
            total - passed
        )))
    }
}
