//! `riesz-lab`: run equilibrium, descent, sweep and validation tasks from JSON configs.

mod config;
mod tasks;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::RunConfig;

#[derive(Parser)]
#[command(name = "riesz-lab", version, about = "Riesz energies and equilibrium measures on sampled sets")]
struct Cli {
    /// Worker threads; defaults to all cores.
    #[arg(long, global = true, env = "RIESZ_LAB_WORKERS")]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the task described by a JSON config.
    Run {
        config: PathBuf,
        /// Output directory; overrides `out_dir` in the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the built-in consistency checks and print a table.
    Validate {
        /// Only run checks whose name contains this string.
        #[arg(long)]
        filter: Option<String>,
    },
}

fn setup_workers(workers: Option<usize>) -> Result<(), String> {
    let Some(k) = workers else { return Ok(()) };
    if k == 0 {
        return Err("--workers must be at least 1".into());
    }
    rayon::ThreadPoolBuilder::new().num_threads(k).build_global().map_err(|e| e.to_string())
}

fn run(path: &PathBuf, out: Option<PathBuf>) -> i32 {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", path.display());
            return tasks::EXIT_CONFIG;
        }
    };
    let cfg = match RunConfig::parse(&text, &path.display().to_string()) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return tasks::EXIT_CONFIG;
        }
    };
    let dir = out.or_else(|| cfg.out_dir.clone()).unwrap_or_else(|| PathBuf::from("out"));
    tasks::execute(&cfg, &dir)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Err(e) = setup_workers(cli.workers) {
        eprintln!("error: {e}");
        return ExitCode::from(tasks::EXIT_CONFIG as u8);
    }
    let code = match cli.command {
        Command::Run { config, out } => run(&config, out),
        Command::Validate { filter } => {
            let report = riesz_core::validate::run_validation(filter.as_deref());
            print!("{report}");
            if report.results.is_empty() {
                eprintln!("error: no check matches the filter");
                tasks::EXIT_CONFIG
            } else if report.all_passed() {
                tasks::EXIT_OK
            } else {
                tasks::EXIT_NUMERIC
            }
        }
    };
    ExitCode::from(code as u8)
}
