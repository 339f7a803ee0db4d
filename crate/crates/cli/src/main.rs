use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod config;
mod verify;

use config::Overrides;

#[derive(Debug, Parser)]
#[command(name = "impulsive", version, about = "Periodic solutions of impulsive Duffing-type equations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    global: GlobalArgs,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// JSON run configuration (optional for `verify`).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory receiving reports and data files.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    #[arg(long, global = true)]
    tol_rel: Option<f64>,
    #[arg(long, global = true)]
    tol_abs: Option<f64>,
    /// Boundary and circle sample count.
    #[arg(long, global = true)]
    samples: Option<usize>,
    /// Period horizon for simulate and the subharmonic search.
    #[arg(long, global = true)]
    horizon: Option<usize>,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Seed for the search-grid jitter.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

impl GlobalArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            tol_rel: self.tol_rel,
            tol_abs: self.tol_abs,
            samples: self.samples,
            horizon: self.horizon,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Integrate one trajectory and export it as CSV.
    Simulate,
    /// One-period winding and angular-speed scans on a circle.
    Rotation,
    /// Certify a disk and locate the 2π-periodic solution.
    Harmonic,
    /// Annulus construction around the harmonic solution.
    Subharmonic,
    /// Oracle and invariant checks.
    Verify,
    /// Harmonic or subharmonic runs over an (a, amplitude) grid.
    Sweep,
}

/// Bad input: exit code 2.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config error: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

/// A check ran to completion and failed: exit code 3.
#[derive(Debug)]
pub struct VerdictFailed(pub String);

impl fmt::Display for VerdictFailed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "FAIL: {}", self.0)
    }
}

impl std::error::Error for VerdictFailed {}

fn core_exit_code(e: &impulsive_core::Error) -> u8 {
    use impulsive_core::Error as E;
    match e {
        E::InvalidSpec(_) | E::InvalidArgument(_) | E::Unsupported(_) => 2,
        E::SearchExhausted { .. } | E::NoIterateFound { .. } => 4,
        E::AtSample { source, .. } => core_exit_code(source),
        _ => 3,
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<ConfigError>() {
            return 2;
        }
        if cause.is::<VerdictFailed>() {
            return 3;
        }
        if let Some(e) = cause.downcast_ref::<impulsive_core::Error>() {
            return core_exit_code(e);
        }
    }
    3
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let g = &cli.global;
    if let Some(n) = g.workers {
        if n == 0 {
            return Err(ConfigError("--workers must be at least 1".into()).into());
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| ConfigError(format!("cannot size the worker pool: {e}")))?;
    }
    std::fs::create_dir_all(&g.out)
        .map_err(|e| ConfigError(format!("cannot create {}: {e}", g.out.display())))?;
    let overrides = g.overrides();
    if let Command::Verify = cli.command {
        let seed = match &g.config {
            Some(path) => config::RunConfig::load(path, &overrides)?.seed,
            None => g.seed,
        };
        return verify::cmd_verify(&g.out, seed);
    }
    let path = g
        .config
        .as_ref()
        .ok_or_else(|| ConfigError("--config is required for this command".into()))?;
    let cfg = config::RunConfig::load(path, &overrides)?;
    match cli.command {
        Command::Simulate => commands::cmd_simulate(&cfg, &g.out),
        Command::Rotation => commands::cmd_rotation(&cfg, &g.out),
        Command::Harmonic => commands::cmd_harmonic(&cfg, &g.out),
        Command::Subharmonic => commands::cmd_subharmonic(&cfg, &g.out),
        Command::Sweep => commands::cmd_sweep(&cfg, &g.out),
        Command::Verify => unreachable!("handled above"),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
