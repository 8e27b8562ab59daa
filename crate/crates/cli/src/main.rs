mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

/// Spectra of Schrödinger operators with potentials concentrated near a curve.
#[derive(Parser)]
#[command(name = "layerspec", version)]
struct Cli {
    /// Experiment configuration (TOML).
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides `output.dir`.
    #[arg(long, short, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum, PartialEq, Eq)]
pub enum OperatorKind {
    Heps,
    Limit,
    DirichletSplit,
}

#[derive(Clone, Copy, Debug, ValueEnum, PartialEq, Eq)]
pub enum MeshChoice {
    Layer,
    Interface,
}

#[derive(Subcommand)]
enum Command {
    /// Resonance test of the profile and the transmission data along the curve.
    Resonance,
    /// Lowest eigenpairs of one operator.
    Solve {
        #[arg(long, value_enum, default_value = "heps")]
        operator: OperatorKind,
        /// Layer width; defaults to the first entry of `schedule.eps`.
        #[arg(long)]
        eps: Option<f64>,
        /// Number of eigenpairs; overrides `solver.k`.
        #[arg(long, short)]
        k: Option<usize>,
    },
    /// Eigenvalue convergence of `H_eps` to the limit over `schedule.eps`.
    Converge,
    /// Weak convergence of the scaled layer potential.
    Distcheck,
    /// Quasimode residuals built from a discrete limit eigenpair.
    Quasimode,
    /// Write mesh node and triangle tables.
    MeshDump {
        #[arg(long, value_enum, default_value = "layer")]
        kind: MeshChoice,
        #[arg(long)]
        eps: Option<f64>,
    },
}

/// Failure carrying the process exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn config(message: String) -> Self {
        CliError { code: 2, message }
    }

    pub fn numerical(message: String) -> Self {
        CliError { code: 3, message }
    }
}

impl From<layerspec::Error> for CliError {
    fn from(e: layerspec::Error) -> Self {
        CliError { code: if e.is_input_error() { 2 } else { 3 }, message: e.to_string() }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::numerical(format!("i/o: {e}"))
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::numerical(format!("csv: {e}"))
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::config("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::config(format!("thread pool: {e}")))?;
    }
    let path = cli.config.ok_or_else(|| CliError::config("--config is required".into()))?;
    let loaded = config::load(&path)?;
    let out = cli.out.unwrap_or_else(|| PathBuf::from(&loaded.cfg.output.dir));
    std::fs::create_dir_all(&out)?;
    let ctx = commands::Context { cfg: &loaded, out };
    match cli.command {
        Command::Resonance => commands::resonance(&ctx),
        Command::Solve { operator, eps, k } => commands::solve_cmd(&ctx, operator, eps, k),
        Command::Converge => commands::converge(&ctx),
        Command::Distcheck => commands::distcheck(&ctx),
        Command::Quasimode => commands::quasimode(&ctx),
        Command::MeshDump { kind, eps } => commands::mesh_dump(&ctx, kind, eps),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
