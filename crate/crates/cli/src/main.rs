//! `hmcf`: runs flows, parallel families and inequality audits.
//!
//! Exit codes: 0 all audits passed (or expected failures confirmed),
//! 1 audit violation, 2 configuration or usage error, 3 numerical failure.

mod commands;
mod params;

use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};

use commands::{print_reports, AuditSphereArgs, BonnesenArgs, FlowArgs, NsScanArgs, ParallelArgs, SteinerArgs, SuiteArgs};
use params::{usage, UsageError};

#[derive(Debug, Parser)]
#[command(name = "hmcf", version, about = "Harmonic mean curvature flow and curvature inequality audits")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Evolve a perturbed sphere by harmonic mean curvature flow
    Flow(FlowArgs),
    /// Run every inequality audit on a geodesic sphere
    AuditSphere(AuditSphereArgs),
    /// Integrals of disc neighbourhoods and their eps -> 0 limits
    NsScan(NsScanArgs),
    /// Steiner lower bound for outer parallels
    Steiner(SteinerArgs),
    /// Bonnesen-type volume bound and the coarea identity
    Bonnesen(BonnesenArgs),
    /// Build and export a family of parallel surfaces
    Parallel(ParallelArgs),
    /// Run the acceptance matrix
    Suite(SuiteArgs),
}

const OK: u8 = 0;
const VIOLATION: u8 = 1;
const USAGE: u8 = 2;
const NUMERICAL: u8 = 3;

fn configure_threads() -> Result<()> {
    let Ok(v) = std::env::var("HMCF_THREADS") else {
        return Ok(());
    };
    let n: usize = v.trim().parse().map_err(|_| usage(format!("HMCF_THREADS must be a non-negative integer, got {v:?}")))?;
    if n > 0 {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn verdict(reports: &[hmcf::audit::AuditReport]) -> u8 {
    print_reports(reports);
    if reports.iter().all(|r| r.pass) {
        OK
    } else {
        VIOLATION
    }
}

fn execute(cli: Cli) -> Result<u8> {
    configure_threads()?;
    Ok(match cli.command {
        Command::Flow(a) => verdict(&commands::flow(a)?),
        Command::AuditSphere(a) => verdict(&commands::audit_sphere(a)?),
        Command::NsScan(a) => verdict(&commands::ns_scan_cmd(a)?),
        Command::Steiner(a) => verdict(&commands::steiner(a)?),
        Command::Bonnesen(a) => verdict(&commands::bonnesen(a)?),
        Command::Parallel(a) => verdict(&commands::parallel(a)?),
        Command::Suite(a) => {
            let s = commands::suite(a)?;
            if s.numerical_failure() {
                NUMERICAL
            } else if s.pass {
                OK
            } else {
                VIOLATION
            }
        }
    })
}

fn exit_code(e: &anyhow::Error) -> u8 {
    if e.downcast_ref::<UsageError>().is_some() {
        return USAGE;
    }
    match e.downcast_ref::<hmcf::Error>() {
        Some(err) if err.is_numerical() => NUMERICAL,
        _ => USAGE,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
