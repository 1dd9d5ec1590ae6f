//! `pdvol`: assumption checks, simulation, features, calibration and reports
//! for the path-dependent volatility model.
//!
//! Exit codes: 0 success (or EXISTENCE+POSITIVITY), 1 config or data error,
//! 2 EXISTENCE only, 3 NEITHER.

mod commands;
mod config;

use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use commands::{Outcome, Overrides};
use config::RunConfig;

#[derive(Debug, Parser)]
#[command(name = "pdvol", version, about = "Path-dependent volatility model toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check the existence and positivity assumptions; exit 0, 2 or 3 by verdict.
    Check(Common),
    /// Simulate paths and the ensemble summary behind the assumption gate.
    Simulate(Common),
    /// Compute the R1/R2 features of a price series.
    Features(Common),
    /// Fit betas and kernel parameters for each configured kernel choice.
    Calibrate(Common),
    /// Rebuild the comparison table from saved calibration results.
    Report(Common),
}

#[derive(Debug, Args)]
struct Common {
    /// INI run configuration.
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Output directory (overrides [output] dir).
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Seed for simulation and calibration (overrides the config).
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    /// Simulate even when the assumption gate returns NEITHER.
    #[arg(long)]
    force: bool,
    /// Worker thread cap; results do not depend on it.
    #[arg(long, value_name = "N")]
    threads: Option<usize>,
}

impl Command {
    fn parts(&self) -> (&'static str, &Common) {
        match self {
            Command::Check(c) => ("check", c),
            Command::Simulate(c) => ("simulate", c),
            Command::Features(c) => ("features", c),
            Command::Calibrate(c) => ("calibrate", c),
            Command::Report(c) => ("report", c),
        }
    }
}

fn run(command: &Command) -> Result<Outcome> {
    let (_, common) = command.parts();
    let cfg = RunConfig::load(&common.config)?;
    let o = Overrides { out: common.out.clone(), seed: common.seed, force: common.force };
    let go = || match command {
        Command::Check(_) => commands::check(&cfg, &o),
        Command::Simulate(_) => commands::simulate(&cfg, &o),
        Command::Features(_) => commands::features(&cfg, &o),
        Command::Calibrate(_) => commands::calibrate_cmd(&cfg, &o),
        Command::Report(_) => commands::report(&cfg, &o),
    };
    match common.threads {
        Some(n) => {
            rayon::ThreadPoolBuilder::new().num_threads(n).build().context("building the worker pool")?.install(go)
        }
        None => go(),
    }
}

fn log_run(out_dir: &Path, name: &str, config: &Path, code: i32) {
    let line = format!(
        "{} {name} config={} exit={code}\n",
        chrono::Local::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, false),
        config.display()
    );
    if let Ok(mut f) = OpenOptions::new().create(true).append(true).open(out_dir.join("run.log")) {
        let _ = f.write_all(line.as_bytes());
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let (name, common) = cli.command.parts();
    match run(&cli.command) {
        Ok(outcome) => {
            log_run(&outcome.out_dir, name, &common.config, outcome.code);
            ExitCode::from(outcome.code as u8)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
