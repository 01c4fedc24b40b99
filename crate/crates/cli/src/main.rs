//! `abctherm`: batch runs of the fractional thermistor solver.

mod config;
mod run;

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use abc_thermistor::{Error, Result};
use clap::Parser;

use config::{parse_config, Mode, RunConfig};
use run::Outcome;

#[derive(Debug, Parser)]
#[command(
    name = "abctherm",
    version,
    about = "Fractional thermistor simulation and Robin control"
)]
struct Cli {
    /// What to run.
    #[arg(value_enum)]
    mode: Mode,
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides run.output_dir).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed of the randomized checks (overrides run.seed).
    #[arg(long)]
    seed: Option<u64>,
    /// Backward Euler in place of the ABC derivative.
    #[arg(long)]
    classical: bool,
    /// Dotted `key=value` overrides, e.g. `model.alpha=0.5`.
    overrides: Vec<String>,
}

fn load(cli: &Cli) -> Result<RunConfig> {
    let text = fs::read_to_string(&cli.config)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", cli.config.display())))?;
    let mut config = parse_config(&text, &cli.overrides)?;
    config.mode = cli.mode;
    if let Some(dir) = &cli.out {
        config.run.output_dir = dir.clone();
    }
    if let Some(seed) = cli.seed {
        config.run.seed = seed;
    }
    if cli.classical {
        config.run.classical = true;
    }
    Ok(config)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let fallback_dir = cli.out.clone().unwrap_or_else(|| PathBuf::from("out"));
    let config = match load(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("abctherm: {e}");
            run::write_error(&fallback_dir, cli.mode, &e);
            return ExitCode::from(1);
        }
    };
    match run::run(&config) {
        Ok(Outcome::Success) => ExitCode::SUCCESS,
        Ok(Outcome::Unmet) => {
            eprintln!("abctherm: {} finished without meeting its targets", config.mode.name());
            ExitCode::from(3)
        }
        Err(e) => {
            eprintln!("abctherm: {e}");
            run::write_error(&config.run.output_dir, config.mode, &e);
            ExitCode::from(1)
        }
    }
}
