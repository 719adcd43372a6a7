//! `rsbc <command> --config <path> [--out <path>] [--threads N]`
//!
//! Writes the CSV to `--out` (stdout if absent) and, with `--out`, a JSON
//! sidecar next to it carrying the configuration echo, version, hash and
//! wall time. Exit codes: 0 success, 2 config error, 3 computation error,
//! 4 I/O error.

mod config;
mod run;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand};
use serde_json::json;
use sha2::{Digest, Sha256};

use config::{parse_config, Command, RunConfig};

#[derive(Parser, Debug)]
#[command(
    name = "rsbc",
    version,
    about = "Rotation-symmetric bosonic codes in a quantum-repeater chain"
)]
struct Cli {
    #[command(subcommand)]
    command: CliCommand,

    /// Run configuration (`key = value` lines).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// CSV output path; a `.json` sidecar is written alongside.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker threads (falls back to RSBC_THREADS).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum CliCommand {
    /// Fock amplitudes of the two codewords.
    Codewords,
    /// Metrics of one code at one chain configuration.
    Link,
    /// Metrics over a parameter grid, optionally optimized per point.
    Sweep,
    /// Key rate maximized over the code parameters.
    Optimize,
    /// Smallest number of links meeting a target key rate.
    Resources,
    /// Cost coefficient: minimum over L0 and L0 at a target cost.
    Cost,
    /// Upper and lower key-rate bounds per total distance.
    Bounds,
}

impl From<CliCommand> for Command {
    fn from(c: CliCommand) -> Self {
        match c {
            CliCommand::Codewords => Command::Codewords,
            CliCommand::Link => Command::Link,
            CliCommand::Sweep => Command::Sweep,
            CliCommand::Optimize => Command::Optimize,
            CliCommand::Resources => Command::Resources,
            CliCommand::Cost => Command::Cost,
            CliCommand::Bounds => Command::Bounds,
        }
    }
}

enum Failure {
    Config(String),
    Compute(String),
    Io(String),
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Compute(_) => 3,
            Failure::Io(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Config(m) | Failure::Compute(m) | Failure::Io(m) => m,
        }
    }
}

fn thread_count(cli: &Cli) -> Result<Option<usize>, Failure> {
    if let Some(n) = cli.threads {
        return Ok(Some(n));
    }
    match std::env::var("RSBC_THREADS") {
        Ok(v) if !v.trim().is_empty() => v.trim().parse().map(Some).map_err(|_| {
            Failure::Config(format!(
                "RSBC_THREADS: expected a positive integer, got {v:?}"
            ))
        }),
        _ => Ok(None),
    }
}

fn sidecar_path(out: &Path) -> PathBuf {
    out.with_extension("json")
}

fn config_hash(config: &RunConfig) -> String {
    let digest = Sha256::digest(config.canonical_text().as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

fn run(cli: &Cli) -> Result<(), Failure> {
    let start = Instant::now();
    let command: Command = cli.command.into();
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| Failure::Config("--config <path> is required".into()))?;
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Io(format!("reading {}: {e}", path.display())))?;
    let config = parse_config(&text, command).map_err(|e| Failure::Config(e.to_string()))?;

    if let Some(n) = thread_count(cli)? {
        rsbc_core::par::set_threads(n).map_err(|e| Failure::Config(format!("threads: {e}")))?;
    }

    let hash = config_hash(&config);
    let output = run::execute(&config, &hash).map_err(|e| Failure::Compute(e.to_string()))?;

    let Some(out) = &cli.out else {
        print!("{}", output.csv);
        return Ok(());
    };
    std::fs::write(out, &output.csv)
        .map_err(|e| Failure::Io(format!("writing {}: {e}", out.display())))?;
    let sidecar = json!({
        "command": command.as_str(),
        "version": env!("CARGO_PKG_VERSION"),
        "config": config.echo,
        "config_hash": hash,
        "csv": out.file_name().map(|n| n.to_string_lossy().into_owned()),
        "timestamp_unix_s": SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
        "wall_time_s": start.elapsed().as_secs_f64(),
        "parallel": rsbc_core::par::parallel_available(),
        "results": output.results,
    });
    let side = sidecar_path(out);
    let body = serde_json::to_string_pretty(&sidecar).expect("JSON values serialize");
    std::fs::write(&side, body + "\n")
        .map_err(|e| Failure::Io(format!("writing {}: {e}", side.display())))?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("rsbc: {}", f.message());
            ExitCode::from(f.exit_code())
        }
    }
}
