//! Config-driven pipeline over the `disslab` diagnostics.
//!
//! Every command reads a TOML config, writes its artifacts atomically into
//! the output directory together with `manifest.json`, and maps its outcome
//! to an exit status: 0 on success, 2 when a mathematical check failed,
//! 1 on usage or runtime errors.

pub mod commands;
pub mod config;
pub mod manifest;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, ValueEnum};

pub use config::PipelineConfig;
pub use manifest::Manifest;

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_CHECK_FAILED: i32 = 2;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Runtime(m) => write!(f, "error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<disslab::Error> for CliError {
    fn from(e: disslab::Error) -> Self {
        match e {
            disslab::Error::InvalidParameter(_) | disslab::Error::OutOfRange(_) | disslab::Error::GridMismatch(_) => {
                CliError::Usage(e.to_string())
            }
            other => CliError::Runtime(other.to_string()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Command {
    Generate,
    Besov,
    Decompose,
    VerifyIdentity,
    Rates,
    Sf,
    Dims,
    Bounds,
    Sweep,
    Report,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Generate => "generate",
            Command::Besov => "besov",
            Command::Decompose => "decompose",
            Command::VerifyIdentity => "verify-identity",
            Command::Rates => "rates",
            Command::Sf => "sf",
            Command::Dims => "dims",
            Command::Bounds => "bounds",
            Command::Sweep => "sweep",
            Command::Report => "report",
        }
    }
}

#[derive(Clone, Debug, Parser)]
#[command(name = "disslab", version, about = "Energy-dissipation diagnostics pipeline")]
pub struct Options {
    #[arg(value_enum)]
    pub command: Command,
    /// TOML pipeline configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Seed for every stochastic step; overrides the config.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads.
    #[arg(long, env = "DISSLAB_THREADS")]
    pub threads: Option<usize>,
    /// Treat boundary verdicts as failures.
    #[arg(long)]
    pub strict: bool,
}

/// Outcome of a successful pipeline run.
#[derive(Debug)]
pub struct Outcome {
    pub manifest: Manifest,
    pub failed_checks: bool,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        if self.failed_checks {
            EXIT_CHECK_FAILED
        } else {
            EXIT_OK
        }
    }
}

/// Runs one command with an already parsed configuration.
pub fn execute(opts: &Options, cfg: &PipelineConfig) -> Result<Outcome, CliError> {
    let mut cfg = cfg.clone();
    if opts.seed.is_some() {
        cfg.seed = opts.seed;
    }
    let config_json = serde_json::to_value(cfg.portable()).map_err(|e| CliError::Runtime(e.to_string()))?;
    let mut run = manifest::Run::new(&opts.out, opts.command.name(), cfg.seed, config_json)?;
    match opts.command {
        Command::Generate => {
            let gen = cfg.generate.clone().ok_or_else(|| CliError::Usage("config lacks a [generate] section".into()))?;
            commands::generate(&cfg, &gen, &mut run)?
        }
        Command::Besov => commands::besov(&cfg, &mut run)?,
        Command::Decompose => commands::decompose(&cfg, &mut run)?,
        Command::VerifyIdentity => commands::verify_identity(&cfg, &mut run)?,
        Command::Rates => commands::rates(&cfg, &mut run)?,
        Command::Sf => commands::sf(&cfg, &mut run)?,
        Command::Dims => commands::dims(&cfg, &mut run)?,
        Command::Bounds => commands::bounds(&cfg, &mut run, opts.strict)?,
        Command::Sweep => commands::sweep(&cfg, &mut run)?,
        Command::Report => commands::report(&cfg, &mut run)?,
    }
    let failed_checks = run.failed();
    Ok(Outcome { manifest: run.finish()?, failed_checks })
}

fn configure_threads(n: Option<usize>) -> Result<(), CliError> {
    if let Some(n) = n {
        if n == 0 {
            return Err(CliError::Usage("--threads must be positive".into()));
        }
        // A second call in the same process keeps the first pool.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

/// Parses `args` (including the program name), runs the command and
/// returns the process exit status. Diagnostics go to stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let opts = match Options::try_parse_from(args) {
        Ok(o) => o,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let result = configure_threads(opts.threads).and_then(|_| {
        let cfg = match &opts.config {
            Some(p) => PipelineConfig::load(p)?,
            None => PipelineConfig::default(),
        };
        execute(&opts, &cfg)
    });
    match result {
        Ok(outcome) => {
            for c in outcome.manifest.checks.iter().filter(|c| !c.pass) {
                eprintln!("check failed: {} ({})", c.name, c.detail);
            }
            outcome.exit_code()
        }
        Err(e) => {
            eprintln!("{e}");
            EXIT_ERROR
        }
    }
}
