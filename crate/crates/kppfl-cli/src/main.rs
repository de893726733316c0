//! Command-line front end for the front-speed toolkit.
//!
//! Exit codes: 0 on success, 2 for configuration errors, 3 for
//! numerical/runtime errors.

mod commands;
mod config;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::CommandContext;
use config::RunConfig;

#[derive(Parser)]
#[command(name = "kppfl", version, about = "KPP front speeds in random flows")]
struct Cli {
    /// Path to the JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output root directory (artifacts land in a config-hash subdir).
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Worker threads (affects speed only, never results). Falls back to
    /// the KPPFL_THREADS environment variable.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Master seed override.
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize a random field realization and its correlation tables.
    GenField,
    /// Run the interacting particle engine for one dual variable.
    RunIpm,
    /// Sweep amplitudes and minimize over the dual variable.
    FrontSpeed,
    /// Cross-check mu with the 2D Eulerian reference solvers.
    Reference2d,
    /// Ensemble statistics: moments over generations, histogram,
    /// diffusion exponents.
    Stats,
}

const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

fn main() -> ExitCode {
    let cli = Cli::parse();

    let threads = cli.threads.or_else(|| {
        std::env::var("KPPFL_THREADS").ok().and_then(|v| v.parse().ok())
    });
    if let Some(n) = threads {
        if n > 0 {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }

    let config_path = match &cli.config {
        Some(p) => p.clone(),
        None => {
            eprintln!("error: --config PATH is required");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let text = match std::fs::read_to_string(&config_path) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", config_path.display());
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let mut config = match RunConfig::from_json(&text) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {e:#}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }

    let ctx = match CommandContext::new(config, &cli.out) {
        Ok(ctx) => ctx,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(EXIT_NUMERICAL);
        }
    };

    let result = match cli.command {
        Command::GenField => commands::cmd_gen_field(&ctx),
        Command::RunIpm => commands::cmd_run_ipm(&ctx),
        Command::FrontSpeed => commands::cmd_front_speed(&ctx),
        Command::Reference2d => commands::cmd_reference_2d(&ctx),
        Command::Stats => commands::cmd_stats(&ctx),
    };

    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if is_config_class(&e) {
                ExitCode::from(EXIT_CONFIG)
            } else {
                ExitCode::from(EXIT_NUMERICAL)
            }
        }
    }
}

/// Missing blocks, dimension mismatches, and precondition violations are
/// configuration mistakes; everything else is a runtime failure.
fn is_config_class(e: &anyhow::Error) -> bool {
    if let Some(kppfl::Error::Contract(_)) = e.downcast_ref::<kppfl::Error>() {
        return true;
    }
    let text = format!("{e}");
    text.contains("needs a") || text.contains("needs flow") || text.contains("two-dimensional")
}
