use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use delaysmc::analysis::{self, AuditSettings, CertificationReport, TraceAudit, DEFAULT_PHI};
use delaysmc::harness::{load_scenario_file, run, Trace};
use delaysmc::Error;

/// Delay-compensated sliding mode control: simulate, certify, audit.
#[derive(Parser)]
#[command(version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write its trace as CSV.
    Simulate {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also write certificate and audit as JSON.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Evaluate the stability certificate of a scenario.
    Certify {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value_t = DEFAULT_PHI)]
        phi: f64,
    },
    /// Audit a recorded trace against the scenario it came from.
    Audit {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        trace: PathBuf,
    },
}

#[derive(Serialize)]
struct RunReport<'a> {
    label: &'a str,
    completed: bool,
    abort_reason: Option<String>,
    rows: usize,
    certification: Option<CertificationReport>,
    audit: Option<TraceAudit>,
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), Error> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n").map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn simulate(scenario: &Path, out: &Path, report: Option<&Path>) -> Result<bool, Error> {
    let sc = load_scenario_file(scenario)?;
    let (trace, abort) = match run(&sc) {
        Ok(trace) => (trace, None),
        Err(aborted) => (aborted.partial, Some(aborted.reason)),
    };
    trace.write_csv(out)?;
    if let Some(reason) = &abort {
        eprintln!("run aborted: {reason}");
    }
    if let Some(path) = report {
        let certification = analysis::certify(&sc, DEFAULT_PHI).ok();
        let audit = if abort.is_none() {
            Some(analysis::audit(&sc, &trace, &AuditSettings::default())?)
        } else {
            None
        };
        write_json(
            path,
            &RunReport {
                label: &sc.label,
                completed: abort.is_none(),
                abort_reason: abort.as_ref().map(ToString::to_string),
                rows: trace.len(),
                certification,
                audit,
            },
        )?;
    }
    Ok(abort.is_none())
}

fn certify(scenario: &Path, phi: f64) -> Result<bool, Error> {
    let sc = load_scenario_file(scenario)?;
    let report = analysis::certify(&sc, phi)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(report.feasible)
}

fn audit(scenario: &Path, trace: &Path) -> Result<bool, Error> {
    let sc = load_scenario_file(scenario)?;
    let trace = Trace::read_csv(trace)?;
    let audit = analysis::audit(&sc, &trace, &AuditSettings::default())?;
    println!("{}", serde_json::to_string_pretty(&audit)?);
    Ok(audit.passed())
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Simulate { scenario, out, report } => simulate(scenario, out, report.as_deref()),
        Command::Certify { scenario, phi } => certify(scenario, *phi),
        Command::Audit { scenario, trace } => audit(scenario, trace),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
