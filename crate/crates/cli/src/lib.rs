//! Configuration-driven experiment runner for scoring-rule posteriors.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use std::path::PathBuf;

use clap::Parser;

pub use commands::{run_experiment, Command, Seeds};
pub use config::ExperimentConfig;
pub use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "genbayes", version, about = "Scoring-rule posterior experiments")]
pub struct Cli {
    pub command: Command,
    /// Experiment configuration (TOML).
    #[arg(long)]
    pub config: PathBuf,
    /// Replace the configured master seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Replace the configured output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Set a config value by dotted path, e.g. `chain.w=0.35`. Repeatable.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

/// Load the config named by `cli`, applying overrides, seed and output flags.
pub fn load_config(cli: &Cli) -> Result<ExperimentConfig, CliError> {
    let text = std::fs::read_to_string(&cli.config)
        .map_err(|e| CliError::validation(format!("cannot read {}: {e}", cli.config.display())))?;
    let mut overrides = cli.overrides.clone();
    if let Some(seed) = cli.seed {
        overrides.push(format!("master_seed={seed}"));
    }
    let mut cfg = ExperimentConfig::from_toml_str(&text, &overrides)?;
    if let Some(base) = cli.config.parent() {
        cfg.resolve_paths(base);
    }
    if let Some(out) = &cli.out {
        cfg.output.dir = out.clone();
    }
    Ok(cfg)
}

/// Parse, run and report; returns the process exit status.
pub fn run(cli: &Cli) -> i32 {
    match load_config(cli).and_then(|cfg| run_experiment(&cfg, cli.command)) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
