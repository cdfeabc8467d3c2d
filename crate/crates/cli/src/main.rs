//! `fluctua run <scenario> -o <dir>`: evaluate a scenario file and write CSV
//! tables plus a JSON manifest.
//!
//! Exit status: 0 when every point converged, 1 on numerical or I/O
//! failure, 2 for an invalid scenario or command line, 3 when a sweep hit
//! an unstable system without `--allow-unstable`.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fluctua::scenario::{parse_scenario, run, RunOptions};
use fluctua::Error;

#[derive(Parser)]
#[command(
    name = "fluctua",
    version,
    about = "Fluctuation-induced observables of planar media with gain"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file.
    Run {
        scenario: PathBuf,
        /// Output directory (created if missing).
        #[arg(short, long, required_unless_present = "check")]
        output: Option<PathBuf>,
        /// Evaluate systems with growing modes instead of stopping.
        #[arg(long)]
        allow_unstable: bool,
        /// Parse and validate only.
        #[arg(long)]
        check: bool,
        /// Override the relative tolerance of all integrals.
        #[arg(long, value_name = "REL")]
        tol: Option<f64>,
    },
}

fn main() -> ExitCode {
    let Command::Run {
        scenario,
        output,
        allow_unstable,
        check,
        tol,
    } = Cli::parse().command;

    let mut s = match parse_scenario(&scenario) {
        Ok(s) => s,
        Err(e @ Error::Io { .. }) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
        Err(e) => {
            eprintln!("{}: {e}", scenario.display());
            return ExitCode::from(2);
        }
    };
    if let Some(t) = tol {
        s.numerics.rel_tol = t;
        s.numerics.rel_tol_2d = t;
        if let Err(e) = s.validate() {
            eprintln!("--tol {t}: {e}");
            return ExitCode::from(2);
        }
    }
    if check {
        println!(
            "{}: ok ({} observables, {} sweeps)",
            scenario.display(),
            s.observables.len(),
            s.sweeps.len()
        );
        return ExitCode::SUCCESS;
    }
    let out = output.expect("clap enforces --output");
    let opts = RunOptions {
        allow_unstable,
        threads: None,
    };
    match run(&s, &out, &opts) {
        Ok(rep) => {
            for o in &rep.outputs {
                let mut line = format!("{}: {}/{} points", o.file, o.rows, o.requested_points);
                if let Some(x) = o.stopped_at {
                    line += &format!(", stopped at unstable point {x:e}");
                    if let Some((lo, hi)) = o.threshold_bracket {
                        line += &format!(" (threshold in [{lo:e}, {hi:e}])");
                    }
                }
                if !o.errors.is_empty() && o.stopped_at.is_none() {
                    line += &format!(", {} failed", o.errors.len());
                }
                println!("{line}");
            }
            println!("manifest: {}", rep.manifest.display());
            ExitCode::from(rep.status.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if matches!(e, Error::Scenario(_)) { 2 } else { 1 })
        }
    }
}
