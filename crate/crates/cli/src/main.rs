//! `fpkfv` command-line driver.
//!
//! Exit codes: 0 on success, 2 on invalid input, 3 when an iteration fails to
//! converge, 1 otherwise.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fpkfv::scenarios::{run_image, run_sampling, run_steady, run_vdp, run_walk, ScenarioConfig};
use fpkfv::{Error, Result};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "fpkfv", version, about = "Finite-volume Fokker-Planck scenarios")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample the triple-banana density under cellular mixing flows.
    Sample(RunArgs),
    /// Transform one PGM/PPM image into another.
    Image(RunArgs),
    /// Relax toward the Van der Pol steady state.
    Vdp(RunArgs),
    /// Steady state, entropy production and spectral gap of a configured drift.
    Steady(RunArgs),
    /// Gillespie paths of a configured drift and their occupation measure.
    Walk(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// JSON scenario config.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `out_dir` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Random seed; overrides `seed` in the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Use the full-size default grids.
    #[arg(long)]
    full_scale: bool,
}

impl RunArgs {
    fn config(&self) -> Result<ScenarioConfig> {
        let mut cfg = ScenarioConfig::load(&self.config)?;
        if let Some(out) = &self.out {
            cfg.out_dir = Some(out.clone());
        }
        if self.seed.is_some() {
            cfg.seed = self.seed;
        }
        cfg.full_scale |= self.full_scale;
        Ok(cfg)
    }
}

fn summary(report: &impl Serialize) -> Result<String> {
    Ok(serde_json::to_string_pretty(report)?)
}

fn run(cmd: &Command) -> Result<String> {
    match cmd {
        Command::Sample(a) => summary(&run_sampling(&a.config()?)?),
        Command::Image(a) => summary(&run_image(&a.config()?, None)?),
        Command::Vdp(a) => summary(&run_vdp(&a.config()?)?),
        Command::Steady(a) => summary(&run_steady(&a.config()?)?),
        Command::Walk(a) => summary(&run_walk(&a.config()?)?),
    }
}

fn exit_code(e: &Error) -> u8 {
    if e.is_validation_failure() {
        2
    } else if e.is_convergence_failure() {
        3
    } else {
        1
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli.command) {
        Ok(text) => {
            println!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
