mod commands;
mod config;
mod error;

use clap::{Parser, Subcommand};
use commands::Ctx;
use config::RunConfig;
use error::CliError;
use smfj::io::Provenance;
use smfj::Method;
use std::path::PathBuf;
use std::process::ExitCode;

/// Option pricing under sub-mixed fractional Brownian motion with jumps.
#[derive(Parser, Debug)]
#[command(name = "smfj", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Run configuration, flat `section.key = value` lines.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Primary output file; stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Overrides `run.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Overrides `run.method`.
    #[arg(long, global = true)]
    method: Option<Method>,

    /// Fill the runtime columns (which makes outputs differ between runs).
    #[arg(long, global = true)]
    timing: bool,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Price one contract with one method.
    Price,
    /// Price one contract with several methods and compare against Monte Carlo.
    Crossval,
    /// Dump simulated log-price paths.
    Simulate,
    /// Fit the six model parameters to quotes by differential evolution.
    Calibrate,
    /// Pricing RMSE over an (H, lambda) grid.
    Surface,
    /// PIDE error against a reference under dt refinement.
    Converge,
    /// Sensitivity report, optionally with scenario and vanna tables.
    Greeks,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Self::Price => "price",
            Self::Crossval => "crossval",
            Self::Simulate => "simulate",
            Self::Calibrate => "calibrate",
            Self::Surface => "surface",
            Self::Converge => "converge",
            Self::Greeks => "greeks",
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let path = cli
        .config
        .ok_or_else(|| CliError::Config("--config <path> is required".into()))?;
    let mut cfg = RunConfig::load(&path)?;
    if let Some(s) = cli.seed {
        cfg.set("run.seed", s);
    }
    if let Some(m) = cli.method {
        cfg.set("run.method", m);
    }
    let seed = cfg.or("run.seed", 42u64)?;
    cfg.set("run.seed", seed);
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("--threads: {e}")))?;
    }
    let prov = Provenance {
        command: cli.command.name().to_string(),
        config_sha256: cfg.sha256(),
        seed,
    };
    log::info!("{} config {} sha256={}", prov.command, path.display(), prov.config_sha256);
    for line in cfg.resolved().lines() {
        log::info!("  {line}");
    }
    let ctx = Ctx {
        cfg,
        seed,
        prov,
        out: cli.out,
        timing: cli.timing,
    };
    match cli.command {
        Command::Price => commands::price(&ctx),
        Command::Crossval => commands::crossval(&ctx),
        Command::Simulate => commands::simulate(&ctx),
        Command::Calibrate => commands::calibrate(&ctx),
        Command::Surface => commands::surface(&ctx),
        Command::Converge => commands::converge(&ctx),
        Command::Greeks => commands::greeks_cmd(&ctx),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
