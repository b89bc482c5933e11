//! `hamforge`: batch front end for scenario files.
//!
//! Exit codes: 0 success, 1 usage or parse error, 2 validation or domain
//! error, 3 failed comparison verdict.

mod commands;
mod output;
mod scenario;
mod sweep;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;
use serde_json::{json, Value};

use commands::{Command, Options};
use output::OutDir;

#[derive(Debug, Parser)]
#[command(name = "hamforge", version, about = "Hamiltonian structures, s-equivalence checks and quantum spectra for T q'' - Theta q' + V q = 0")]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// Scenario JSON file.
    scenario: Option<PathBuf>,
    /// Directory for report.json and CSV files.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Cross-check closed-form levels against the Fock-space oracle.
    #[arg(long)]
    oracle: bool,
    /// Occupation cutoff per mode for the oracle.
    #[arg(long, value_name = "N")]
    cutoff: Option<usize>,
    /// Run over a parameter grid, e.g. theta=0:1:0.25.
    #[arg(long, value_name = "PARAM=A:B:STEP")]
    sweep: Option<String>,
    /// Also validate N random models.
    #[arg(long, value_name = "N")]
    random: Option<usize>,
    /// Seed for --random; overrides the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Record wall-clock time in the report (reports then differ between runs).
    #[arg(long)]
    timing: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn parse(message: impl Into<String>) -> Self {
        Self { code: 1, message: message.into() }
    }

    pub fn domain(message: impl Into<String>) -> Self {
        Self { code: 2, message: message.into() }
    }
}

impl From<hamforge_core::Error> for Failure {
    fn from(e: hamforge_core::Error) -> Self {
        Self::domain(e.to_string())
    }
}

fn report(command: Command, scenario: Value, structures: Vec<Value>, results: Value, exit: u8) -> Value {
    json!({
        "command": command.name(),
        "version": env!("CARGO_PKG_VERSION"),
        "scenario": scenario,
        "structures": structures,
        "results": results,
        "exit_code": exit,
    })
}

fn execute(cli: &Cli) -> Result<(Value, u8), Failure> {
    let scenario = cli.scenario.as_deref().map(scenario::load).transpose()?;
    let opts = Options { oracle: cli.oracle, cutoff: cli.cutoff, random: cli.random, seed: cli.seed };
    let out = OutDir(cli.out.clone());
    let echo = scenario.as_ref().map(|s| s.echo()).unwrap_or(Value::Null);
    if let Some(spec) = &cli.sweep {
        let grid = sweep::parse_sweep(spec)?;
        let base = scenario.as_ref().ok_or_else(|| Failure::parse("--sweep needs a scenario file"))?;
        let (results, exit) = sweep::run_sweep(cli.command, base, &grid, &opts, &out)?;
        return Ok((report(cli.command, echo, Vec::new(), results, exit), exit));
    }
    let result = commands::run(cli.command, scenario.as_ref(), &opts, &out)?;
    Ok((report(cli.command, echo, result.structures, result.results, result.exit), result.exit))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let start = Instant::now();
    match execute(&cli) {
        Ok((mut value, exit)) => {
            if cli.timing {
                value["wall_clock_s"] = json!(start.elapsed().as_secs_f64());
            }
            let text = output::to_json(&value);
            if let Err(f) = OutDir(cli.out.clone()).write_str("report.json", &text) {
                eprintln!("error: {}", f.message);
                return ExitCode::from(f.code);
            }
            print!("{text}");
            ExitCode::from(exit)
        }
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
