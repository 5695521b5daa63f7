mod commands;
mod config;
mod output;
mod svg;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{load_file, Overrides, RunConfig};
use output::{to_json, Metadata};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("{0}")]
    Numerical(String),
    #[error("io: {0}")]
    Io(String),
}

impl CliError {
    pub fn io(e: impl std::fmt::Display) -> Self {
        CliError::Io(e.to_string())
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) => 1,
        }
    }
}

fn is_contract_violation(e: &kzwork::Error) -> bool {
    use kzwork::Error as E;
    match e {
        E::InvalidProtocol(_) | E::InvalidGrid(_) | E::InvalidUGrid(_) | E::UnknownMethod(_) | E::MethodPrecondition { .. } => {
            true
        }
        E::SweepPoint { source, .. } => is_contract_violation(source),
        _ => false,
    }
}

impl From<kzwork::Error> for CliError {
    fn from(e: kzwork::Error) -> Self {
        if is_contract_violation(&e) {
            CliError::Config(e.to_string())
        } else {
            CliError::Numerical(e.to_string())
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "kzwork", version, about = "Work statistics of linear quenches in the transverse-field Ising chain")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Per-site work cumulants at one quench rate
    Cumulants,
    /// Cumulants over a grid of rates, with power-law fits
    Sweep,
    /// ln chi(u) per site on a grid of u
    Cfw,
    /// Large-deviation rate function of the work per site
    RateFunction,
    /// Real-u zeros of the characteristic function
    Dqpt,
    /// Predicted scaling exponent of the n-th cumulant
    Predict {
        d: u32,
        z: f64,
        nu: f64,
        n: u32,
        /// The quench ends at the critical point
        #[arg(long)]
        critical: bool,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Cumulants => "cumulants",
            Command::Sweep => "sweep",
            Command::Cfw => "cfw",
            Command::RateFunction => "rate-function",
            Command::Dqpt => "dqpt",
            Command::Predict { .. } => "predict",
        }
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    std::fs::write(path, bytes).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn run(cli: Cli) -> Result<(), CliError> {
    let file = match &cli.overrides.config {
        Some(p) => load_file(p)?,
        None => Default::default(),
    };
    let cfg = RunConfig::resolve(cli.command.name(), file, &cli.overrides)?;
    let outcome = match &cli.command {
        Command::Cumulants => commands::cumulants(&cfg)?,
        Command::Sweep => commands::sweep(&cfg)?,
        Command::Cfw => commands::cfw(&cfg)?,
        Command::RateFunction => commands::rate(&cfg)?,
        Command::Dqpt => commands::dqpt(&cfg)?,
        &Command::Predict { d, z, nu, n, critical } => commands::predict(d, z, nu, n, critical)?,
    };
    let meta = Metadata::new(&cfg)?;
    let is_predict = matches!(cli.command, Command::Predict { .. });

    match &cfg.output.out {
        Some(path) => {
            let mut buf = Vec::new();
            outcome.table.write_csv(&meta, &mut buf)?;
            write_file(path, &buf)?;
            if let Some(s) = &outcome.summary {
                println!("{s}");
            }
        }
        None if is_predict => {
            if let Some(s) = &outcome.summary {
                println!("{s}");
            }
        }
        None => {
            let stdout = std::io::stdout();
            outcome.table.write_csv(&meta, stdout.lock())?;
            if let Some(s) = &outcome.summary {
                eprintln!("{s}");
            }
        }
    }
    if let Some(json) = &outcome.json {
        let target: Option<PathBuf> = cfg
            .output
            .json
            .clone()
            .or_else(|| cfg.output.out.as_ref().map(|p| p.with_extension("json")));
        if let Some(path) = target {
            write_file(&path, to_json(&meta, json)?.as_bytes())?;
        }
    }
    if let (Some(svg), Some(path)) = (&outcome.svg, &cfg.output.svg) {
        write_file(path, svg.as_bytes())?;
    }
    std::io::stdout().flush().map_err(CliError::io)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("kzwork: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
