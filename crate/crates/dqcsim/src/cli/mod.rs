//! Command line front end: protocol runs, distinguishability reports,
//! attack sweeps, stabilizer checks and a quick self test.

mod checks;
mod config;
mod run;

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

pub use checks::{
    cmd_bound, cmd_selftest, cmd_stabcheck, BoundReport, SelfTestLine, StabReport, StabRow, FAIL_CEILING,
    FULL_GROUP_CAP,
};
pub use config::{Mode, ProtocolName, RunConfig};
pub use run::{cmd_distinguish, cmd_run, rsp_probes, DistinguishReport, NaiveRspSimulator, RunResult, SimulatorChoice};

use crate::adversary::sweep_csv;
use crate::error::{DqcError, Result};
use crate::graphstate::Graph;

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
/// A check ran and did not pass.
pub const EXIT_CHECK_FAILED: i32 = 2;
/// The protocol aborted.
pub const EXIT_ABORT: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "dqcsim", version, about = "Exact simulation of delegated MBQC protocols")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// JSON config (run, distinguish, bound) or graph file (stabcheck).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true, value_enum)]
    pub mode: Option<Mode>,
    /// Maximum attack weight for `bound`.
    #[arg(long, global = true)]
    pub weight: Option<usize>,
    /// Write the full report here.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Print JSON instead of a summary.
    #[arg(long, global = true)]
    pub json: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one protocol from a config.
    Run,
    /// Compare the real RSP system with an ideal one.
    Distinguish {
        #[arg(long, value_enum, default_value = "matched")]
        simulator: SimulatorChoice,
    },
    /// Sweep class E attacks against trap verification.
    Bound,
    /// Check stabilizer tests on a graph.
    Stabcheck {
        /// Every non-identity group element instead of the generators.
        #[arg(long)]
        full: bool,
        /// Also report whether the graph is two-colourable.
        #[arg(long)]
        two_colorable: bool,
    },
    /// Quick end-to-end checks.
    Selftest,
}

fn config_or_default(path: Option<&Path>) -> Result<RunConfig> {
    path.map(RunConfig::load).unwrap_or_else(|| Ok(RunConfig::default()))
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| DqcError::Io(format!("{}: {e}", path.display())))
}

fn to_json<T: serde::Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serialisable");
    s.push('\n');
    s
}

fn io(e: std::io::Error) -> DqcError {
    DqcError::Io(e.to_string())
}

fn verdict(pass: bool) -> i32 {
    if pass {
        EXIT_OK
    } else {
        EXIT_CHECK_FAILED
    }
}

/// Execute a parsed command line, writing reports to `stdout`.
pub fn execute(cli: &Cli, stdout: &mut dyn Write) -> Result<i32> {
    match &cli.command {
        Command::Run => {
            let path = cli.config.as_deref().ok_or_else(|| DqcError::Config("run needs --config".into()))?;
            let r = cmd_run(&RunConfig::load(path)?, cli.mode, cli.seed)?;
            let json = r.to_json();
            if let Some(out) = &cli.out {
                write_file(out, &json)?;
            }
            if cli.json {
                stdout.write_all(json.as_bytes()).map_err(io)?;
            } else {
                writeln!(stdout, "{}", r.summary()).map_err(io)?;
            }
            Ok(if r.accepted { EXIT_OK } else { EXIT_ABORT })
        }
        Command::Distinguish { simulator } => {
            let r = cmd_distinguish(&config_or_default(cli.config.as_deref())?, *simulator)?;
            if let Some(out) = &cli.out {
                write_file(out, &to_json(&r))?;
            }
            if cli.json {
                stdout.write_all(to_json(&r).as_bytes()).map_err(io)?;
            } else {
                writeln!(stdout, "{}", r.summary()).map_err(io)?;
            }
            Ok(verdict(r.pass))
        }
        Command::Bound => {
            let (rows, r) = cmd_bound(&config_or_default(cli.config.as_deref())?, cli.weight.unwrap_or(2))?;
            let csv = sweep_csv(&rows)?;
            match &cli.out {
                Some(out) => write_file(out, &csv)?,
                None if !cli.json => stdout.write_all(csv.as_bytes()).map_err(io)?,
                None => {}
            }
            if cli.json {
                stdout.write_all(to_json(&r).as_bytes()).map_err(io)?;
            } else {
                writeln!(stdout, "{}", r.summary_line()).map_err(io)?;
            }
            Ok(verdict(r.pass))
        }
        Command::Stabcheck { full, two_colorable } => {
            let path =
                cli.config.as_deref().ok_or_else(|| DqcError::Config("stabcheck needs --config GRAPH".into()))?;
            let text = std::fs::read_to_string(path).map_err(|e| DqcError::Io(format!("{}: {e}", path.display())))?;
            let r = cmd_stabcheck(&Graph::from_json(&text)?, *full, *two_colorable)?;
            if let Some(out) = &cli.out {
                write_file(out, &to_json(&r))?;
            }
            if cli.json {
                stdout.write_all(to_json(&r).as_bytes()).map_err(io)?;
            } else {
                if r.two_colorable == Some(false) {
                    writeln!(stdout, "note: graph is not two-colourable, Protocol 3 does not apply").map_err(io)?;
                }
                for row in &r.rows {
                    let v = if row.pass { "PASS" } else { "FAIL" };
                    writeln!(stdout, "{v} {} (max RM/PS gap {:.3e})", row.element, row.max_rm_ps_gap).map_err(io)?;
                }
            }
            Ok(verdict(r.pass))
        }
        Command::Selftest => {
            let lines = cmd_selftest();
            if cli.json {
                stdout.write_all(to_json(&lines).as_bytes()).map_err(io)?;
            } else {
                for l in &lines {
                    let v = if l.pass { "PASS" } else { "FAIL" };
                    writeln!(stdout, "{v} {}: {}", l.name, l.detail).map_err(io)?;
                }
            }
            if let Some(out) = &cli.out {
                write_file(out, &to_json(&lines))?;
            }
            Ok(verdict(lines.iter().all(|l| l.pass)))
        }
    }
}

/// Parse `args`, run, and map errors to the exit-code contract.
pub fn main_with<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let shown = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(stderr, "{shown}");
                EXIT_ERROR
            } else {
                let _ = write!(stdout, "{shown}");
                EXIT_OK
            };
        }
    };
    match execute(&cli, stdout) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            EXIT_ERROR
        }
    }
}
