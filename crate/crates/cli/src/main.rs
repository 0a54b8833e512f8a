mod commands;
mod config;
mod table;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{Format, RunConfig};

#[derive(Parser, Debug)]
#[command(name = "boseloc", version, about = "Self-localization of few bosons in superlattices")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides `out` in the config).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Worker threads; 0 lets the pool decide.
    #[arg(long, global = true, env = "BOSELOC_THREADS")]
    threads: Option<usize>,
    /// Also write the Hamiltonian's nonzero elements (spectrum).
    #[arg(long, global = true)]
    dump_matrix: bool,
    /// Validate the config for the command and print it, without computing.
    #[arg(long, global = true)]
    dry_run: bool,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Eigenvalues and optional eigenvectors.
    Spectrum,
    /// Classification report for every eigenstate.
    Classify,
    /// Self-localized fractions over a parameter grid.
    Scan,
    /// Gap-ratio statistics of two-boson ensembles.
    Rstats,
    /// Bands of the periodic superlattice and projections of localized orbitals.
    Bloch,
    /// Walk, loading and free evolution on the lattice with auxiliary sites.
    Protocol,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Spectrum => "spectrum",
            Command::Classify => "classify",
            Command::Scan => "scan",
            Command::Rstats => "rstats",
            Command::Bloch => "bloch",
            Command::Protocol => "protocol",
        }
    }
}

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Core(boseloc::Error),
    Io(std::io::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        use boseloc::Error as E;
        match self {
            CliError::Config(_) => 2,
            CliError::Io(_) => 1,
            CliError::Core(E::InvalidParameter(_)) => 2,
            CliError::Core(E::Capacity { .. }) => 4,
            CliError::Core(E::Io(_)) => 1,
            CliError::Core(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Core(e) if e.is_numerical() => write!(f, "numerical error: {e}"),
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Io(e) => write!(f, "I/O error: {e}"),
        }
    }
}

impl From<boseloc::Error> for CliError {
    fn from(e: boseloc::Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if cli.dump_matrix {
        cfg.spectrum.dump_matrix = true;
    }
    if cli.dry_run {
        commands::check(&cfg, cli.command.name())?;
        println!("{}", serde_json::to_string_pretty(&cfg).expect("serializable"));
        return Ok(());
    }
    let format = cli.format.or(cfg.format).unwrap_or_default();
    let out = cli.out.clone().or(cfg.out.clone()).unwrap_or_else(|| PathBuf::from("."));
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    }
    std::fs::create_dir_all(&out)?;
    let ctx = commands::Context { cfg: &cfg, out: &out, format };
    match cli.command {
        Command::Spectrum => commands::spectrum(&ctx),
        Command::Classify => commands::classify(&ctx),
        Command::Scan => commands::scan(&ctx),
        Command::Rstats => commands::rstats(&ctx),
        Command::Bloch => commands::bloch(&ctx),
        Command::Protocol => commands::protocol(&ctx),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("boseloc: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
