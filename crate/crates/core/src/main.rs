use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use poa_lab_core::harness::{self, ExperimentReport};
use poa_lab_core::instances::{build_instance, list_instances, InstanceParams};
use poa_lab_core::smoothness::{bound_table, write_bound_table};
use poa_lab_core::Error;

#[derive(Parser)]
#[command(
    name = "poa-lab",
    version,
    about = "Multi-unit auction equilibrium and efficiency laboratory"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a JSON config.
    Run { config: PathBuf },
    /// List the named instances.
    ListInstances,
    /// Print the price-of-anarchy bound table.
    BoundTable {
        /// Write CSV here instead of stdout.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Check a named instance against its expected quantities.
    Verify {
        /// Instance id, see `list-instances`.
        id: String,
        /// Number of units, for instances that take it.
        #[arg(long)]
        k: Option<usize>,
        /// Small valuation of the filler bidders in the lower-bound game.
        #[arg(long)]
        eps: Option<f64>,
        /// Grid tick used for equilibrium checks.
        #[arg(long)]
        tick: Option<f64>,
    },
}

const PASS: u8 = 0;
const FAIL: u8 = 1;
const CONFIG: u8 = 2;

fn error_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Json(_) | Error::Io(_) | Error::UnknownInstance(_) => CONFIG,
        _ => FAIL,
    }
}

fn summarize(report: &ExperimentReport) -> u8 {
    for r in &report.rows {
        println!(
            "{} {} {} margin={} poa={}",
            if r.passed { "PASS" } else { "FAIL" },
            r.experiment,
            r.instance,
            r.margin.map_or("-".into(), |m| format!("{m:.6e}")),
            r.poa.map_or("-".into(), |p| format!("{p:.6}")),
        );
    }
    println!(
        "runtime {:.1} ms on {} threads",
        report.timing.runtime_ms, report.timing.threads
    );
    if report.passed {
        PASS
    } else {
        FAIL
    }
}

fn execute(cli: Cli) -> Result<u8, Error> {
    match cli.command {
        Command::Run { config } => Ok(summarize(&harness::run_path(&config)?)),
        Command::ListInstances => {
            for (id, about) in list_instances() {
                println!("{id:<30} {about}");
            }
            Ok(PASS)
        }
        Command::BoundTable { csv } => {
            let rows = bound_table();
            match csv {
                Some(path) => write_bound_table(&rows, std::fs::File::create(path)?)?,
                None => write_bound_table(&rows, std::io::stdout().lock())?,
            }
            Ok(PASS)
        }
        Command::Verify { id, k, eps, tick } => {
            let inst = build_instance(
                &id,
                &InstanceParams {
                    k,
                    eps,
                    tick,
                    ..Default::default()
                },
            )?;
            let out = harness::verify(&inst, tick)?;
            for c in &out.checks {
                println!(
                    "{} {} {:?} {} (tol {}) measured {}",
                    if c.passed { "PASS" } else { "FAIL" },
                    c.name,
                    c.relation,
                    c.expected,
                    c.tolerance,
                    c.measured.map_or("-".into(), |m| m.to_string()),
                );
            }
            Ok(if out.passed { PASS } else { FAIL })
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { CONFIG } else { PASS });
        }
    };
    match execute(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(error_code(&e))
        }
    }
}
