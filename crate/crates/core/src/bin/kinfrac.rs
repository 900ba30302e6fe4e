//! `kinfrac run <config.json> [--threads N] [--seed S] [--out DIR]`
//!
//! Exit status: 0 when every metric passes, 1 when a threshold fails,
//! 2 on configuration or I/O errors.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use kinfrac::experiment::{self, RunConfig};

#[derive(Parser)]
#[command(name = "kinfrac", version, about = "Kinetic-to-fractional limit experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment described by a JSON config.
    Run {
        config: PathBuf,
        /// Worker threads (default: all cores).
        #[arg(long)]
        threads: Option<usize>,
        /// Overrides the seed in the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the output directory in the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let Command::Run {
        config,
        threads,
        seed,
        out,
    } = Cli::parse().command;
    if let Some(n) = threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot size the thread pool: {e}");
            return ExitCode::from(2);
        }
    }
    let text = match std::fs::read_to_string(&config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: {}: {e}", config.display());
            return ExitCode::from(2);
        }
    };
    let mut cfg = match RunConfig::from_json(&text) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {}: {e}", config.display());
            return ExitCode::from(2);
        }
    };
    if seed.is_some() {
        cfg.seed = seed;
    }
    if let Some(dir) = out {
        // relative to where the command runs, not to the config file
        cfg.output_dir = Some(std::env::current_dir().map(|cwd| cwd.join(&dir)).unwrap_or(dir));
    }
    let base = config.parent().unwrap_or(Path::new("."));
    match experiment::run(&cfg, base) {
        Ok(report) => {
            print!("{}", report.render());
            let verdict = if report.pass() { "PASS" } else { "FAIL" };
            println!("{verdict} {} in {:.1} s", report.experiment.name(), report.wall_seconds);
            if report.pass() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
