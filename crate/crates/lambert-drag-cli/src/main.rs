//! Command-line front end: solve, sweep and diagnose subcommands.
//!
//! Exit codes: 0 success, 2 usage or configuration error, 3 numerical
//! failure.

// `!(x > 0)` rejects NaN along with nonpositive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod config;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{Config, DirectionSpec};
use run::CmdError;

#[derive(Parser)]
#[command(
    name = "lambert-drag",
    version,
    about = "Two-point boundary-value solver for the planar Kepler problem with linear drag"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve one boundary-value problem and write per-arc summaries.
    Solve(CommonArgs),
    /// Solve a grid of problems over the flight time or endpoint angle.
    Sweep(CommonArgs),
    /// Check field admissibility and optionally audit an exported trajectory.
    Diagnose(DiagnoseArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Run configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory for summaries and CSV files.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Override the configured rotation direction (cw|ccw|auto).
    #[arg(long)]
    direction: Option<String>,
    /// Override the relative integration tolerance.
    #[arg(long)]
    rtol: Option<f64>,
    /// Override the absolute integration tolerance.
    #[arg(long)]
    atol: Option<f64>,
    /// Print the effective configuration as JSON and exit.
    #[arg(long)]
    dump_config: bool,
}

#[derive(Args)]
struct DiagnoseArgs {
    /// Run configuration (JSON); only the field section is required to be
    /// meaningful.
    #[arg(long)]
    config: PathBuf,
    /// Previously exported trajectory CSV to audit (p-bounds and energy
    /// monotonicity).
    #[arg(long)]
    trajectory: Option<PathBuf>,
    /// Print the effective configuration as JSON and exit.
    #[arg(long)]
    dump_config: bool,
}

fn load_with_overrides(args: &CommonArgs) -> Result<Config, CmdError> {
    let mut cfg = Config::load(&args.config).map_err(CmdError::config)?;
    if let Some(d) = &args.direction {
        cfg.problem.direction = DirectionSpec::parse(d).map_err(CmdError::config)?;
    }
    if let Some(rtol) = args.rtol {
        cfg.integrator.rtol = Some(rtol);
    }
    if let Some(atol) = args.atol {
        cfg.integrator.atol = Some(atol);
    }
    Ok(cfg)
}

fn dump(cfg: &Config) -> Result<u8, CmdError> {
    println!("{}", serde_json::to_string_pretty(cfg).unwrap());
    Ok(0)
}

fn dispatch(cli: Cli) -> Result<u8, CmdError> {
    match cli.cmd {
        Cmd::Solve(args) => {
            let cfg = load_with_overrides(&args)?;
            if args.dump_config {
                return dump(&cfg);
            }
            run::run_solve(&cfg, &args.out)
        }
        Cmd::Sweep(args) => {
            let cfg = load_with_overrides(&args)?;
            if args.dump_config {
                return dump(&cfg);
            }
            run::run_sweep(&cfg, &args.out)
        }
        Cmd::Diagnose(args) => {
            let cfg = Config::load(&args.config).map_err(CmdError::config)?;
            if args.dump_config {
                return dump(&cfg);
            }
            run::run_diagnose(&cfg, args.trajectory.as_deref())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {}", err.message);
            ExitCode::from(err.code)
        }
    }
}
