//! `trimode <experiment> [--config FILE] [--out DIR] [--seed N] [--threads N] [--print-config]`

mod config;
mod error;
mod experiments;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use config::{Experiment, ExperimentConfig};
use error::CliError;
use output::Bundle;

#[derive(Parser, Debug)]
#[command(name = "trimode", version, about = "Run a trimode refrigerator experiment")]
struct Cli {
    #[arg(value_enum)]
    experiment: Experiment,
    /// JSON file overriding the embedded defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory; overrides the config's `output`.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; defaults to all cores.
    #[arg(long)]
    threads: Option<usize>,
    /// Print the effective configuration and exit.
    #[arg(long)]
    print_config: bool,
}

fn resolve(cli: &Cli) -> Result<ExperimentConfig, CliError> {
    let overrides = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::config("$", format!("cannot read {}: {e}", path.display())))?;
            serde_json::from_str(&text).map_err(|e| CliError::config("$", format!("invalid JSON: {e}")))?
        }
        None => serde_json::json!({}),
    };
    let mut cfg = ExperimentConfig::from_overrides(cli.experiment, overrides)?;
    if let Some(out) = &cli.out {
        cfg.output = out.display().to_string();
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = resolve(&cli)?;
    if cli.print_config {
        println!("{}", serde_json::to_string_pretty(&cfg).expect("config serializes"));
        return Ok(());
    }
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::config("--threads", "must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::config("--threads", e.to_string()))?;
    }
    let mut bundle = Bundle::create(&PathBuf::from(&cfg.output))?;
    log::info!("running {} into {}", cfg.experiment, cfg.output);
    experiments::run(&cfg, &mut bundle)?;
    let manifest = bundle.finish(&cfg)?;
    println!("{}", manifest.display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
