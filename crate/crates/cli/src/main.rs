use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use prodform::catalog;
use prodform::config::ExperimentConfig;
use prodform::runner::{self, RunOptions};

#[derive(Parser)]
#[command(name = "prodform", version, about = "Convergence experiments for product formulas on truncated Fock spaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write `<name>.csv` and `<name>.json`.
    Run {
        #[command(flatten)]
        source: Source,
        #[arg(long, default_value = "results")]
        out_dir: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads for the n-grid (default: all cores).
        #[arg(long)]
        threads: Option<usize>,
        #[arg(long)]
        oracle_tol: Option<f64>,
        /// Write zero wall times so reruns are byte-identical.
        #[arg(long)]
        no_timing: bool,
    },
    /// Print the built-in experiments.
    ListExperiments,
    /// Check a config without running it.
    Validate {
        #[command(flatten)]
        source: Source,
    },
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct Source {
    /// Path to a TOML experiment config.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Name of a built-in experiment (see list-experiments).
    #[arg(long)]
    experiment: Option<String>,
}

fn load(source: &Source) -> Result<ExperimentConfig, String> {
    match (&source.config, &source.experiment) {
        (Some(path), _) => ExperimentConfig::from_path(path).map_err(|e| format!("{}: {e}", path.display())),
        (None, Some(name)) => catalog::find(name)
            .ok_or_else(|| format!("unknown experiment {name:?}; see list-experiments"))?
            .config()
            .map_err(|e| e.to_string()),
        (None, None) => Err("either --config or --experiment is required".into()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::ListExperiments => {
            for entry in catalog::catalog() {
                println!("{:<22} {}", entry.name, entry.description());
            }
            ExitCode::SUCCESS
        }
        Command::Validate { source } => {
            let cfg = match load(&source) {
                Ok(c) => c,
                Err(msg) => {
                    eprintln!("error: {msg}");
                    return ExitCode::from(2);
                }
            };
            match cfg.validate() {
                Ok(()) => {
                    println!("{}: ok", cfg.name);
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(2)
                }
            }
        }
        Command::Run { source, out_dir, seed, threads, oracle_tol, no_timing } => {
            let cfg = match load(&source) {
                Ok(c) => c,
                Err(msg) => {
                    eprintln!("error: {msg}");
                    return ExitCode::from(2);
                }
            };
            let opts = RunOptions { seed, oracle_tol, threads, timing: no_timing.then_some(false) };
            match runner::run(&cfg, &opts, &out_dir) {
                Ok((result, paths)) => {
                    match (&result.report, &result.fit_error) {
                        (Some(r), _) => println!(
                            "{}: slope {:.4}, intercept {:.4}, R² {:.5}",
                            result.name, r.slope, r.intercept, r.r_squared
                        ),
                        (None, Some(e)) => println!("{}: no order fit ({e})", result.name),
                        (None, None) => println!("{}: done", result.name),
                    }
                    for p in paths {
                        println!("  wrote {}", p.display());
                    }
                    ExitCode::SUCCESS
                }
                Err(failure) => {
                    eprintln!("error: {failure}");
                    ExitCode::from(failure.exit_code() as u8)
                }
            }
        }
    }
}
