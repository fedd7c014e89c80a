//! Command-line interface: `analyze` (one dataset, estimates table) and
//! `simulate` (scenario, bias/SD and coverage tables).

pub mod analyze;
pub mod config;
pub mod csv_io;
pub mod report;

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::error::Result;
use crate::simulation::{run_monte_carlo, standard_method_grid, MonteCarloSummary, Scenario};

pub use analyze::{run_analysis, AnalyzeOutcome};
pub use config::{AnalysisConfig, ScenarioConfig};
pub use csv_io::{read_table, NamedTable};

#[derive(Parser)]
#[command(
    name = "hybridctl",
    version,
    about = "Estimation and inference for hybrid control studies"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Analyze a CSV dataset with the configured methods and weights.
    Analyze {
        /// Input CSV with header z,a,y,<covariates...>
        #[arg(long)]
        data: PathBuf,
        /// Analysis configuration (TOML).
        #[arg(long)]
        config: PathBuf,
        /// Directory for estimates.csv / estimates.txt.
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
        /// Overrides the bootstrap seed from the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the bootstrap resample count from the config.
        #[arg(long = "bootstrap-B")]
        bootstrap_b: Option<usize>,
        /// Worker threads (default: all cores).
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Run the Monte Carlo study for a scenario and emit summary tables.
    Simulate {
        /// Scenario configuration (TOML).
        #[arg(long)]
        config: PathBuf,
        /// Directory for the bias_sd / coverage CSV and text outputs.
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
        /// Number of replications.
        #[arg(long, default_value_t = 10_000)]
        reps: usize,
        /// Master seed.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Worker threads (default: all cores).
        #[arg(long)]
        workers: Option<usize>,
    },
}

/// Parses the command line and runs; returns the process exit code.
/// Exit 0 means every cell succeeded; 1 is a hard error; 2 means some
/// analysis cells failed (they are listed on standard error).
pub fn run() -> i32 {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(failed_cells) => {
            if failed_cells.is_empty() {
                0
            } else {
                for (cell, err) in &failed_cells {
                    eprintln!("cell failed: {cell}: {err}");
                }
                2
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn dispatch(cli: Cli) -> Result<Vec<(String, String)>> {
    match cli.command {
        Command::Analyze {
            data,
            config,
            out_dir,
            seed,
            bootstrap_b,
            workers,
        } => in_pool(workers, || {
            let cfg = AnalysisConfig::from_toml(&fs::read_to_string(&config)?)?;
            let named = read_table(&data)?;
            let outcome = run_analysis(&named, &cfg, bootstrap_b, seed)?;
            fs::create_dir_all(&out_dir)?;
            write_file(
                &out_dir.join("estimates.csv"),
                &outcome.report.to_csv_string(),
            )?;
            write_file(
                &out_dir.join("estimates.txt"),
                &outcome.report.to_text_table(),
            )?;
            println!(
                "analyze: {} rows -> {}",
                outcome.report.rows.len(),
                out_dir.display()
            );
            Ok(outcome.failed_cells)
        }),
        Command::Simulate {
            config,
            out_dir,
            reps,
            seed,
            workers,
        } => in_pool(workers, || {
            let cfg = ScenarioConfig::from_toml(&fs::read_to_string(&config)?)?;
            let scenario = cfg.to_scenario()?;
            let summary = run_monte_carlo(&scenario, &standard_method_grid(), reps, seed)?;
            write_simulation_outputs(&out_dir, &summary)?;
            println!(
                "simulate: {} cells x {} reps -> {}",
                summary.cells.len(),
                reps,
                out_dir.display()
            );
            Ok(Vec::new())
        }),
    }
}

/// Writes the bias_sd / coverage CSV and text files for a finished run.
pub fn write_simulation_outputs(out_dir: &Path, summary: &MonteCarloSummary) -> Result<()> {
    fs::create_dir_all(out_dir)?;
    write_file(&out_dir.join("bias_sd.csv"), &report::bias_sd_csv(summary))?;
    write_file(&out_dir.join("coverage.csv"), &report::coverage_csv(summary))?;
    write_file(&out_dir.join("bias_sd.txt"), &report::bias_sd_text(summary))?;
    write_file(&out_dir.join("coverage.txt"), &report::coverage_text(summary))?;
    Ok(())
}

/// Runs a simulation for an already-built scenario (library-level entry
/// used by tests and downstream callers).
pub fn simulate_scenario(
    scenario: &Scenario,
    reps: usize,
    seed: u64,
    workers: Option<usize>,
) -> Result<MonteCarloSummary> {
    in_pool(workers, || {
        run_monte_carlo(scenario, &standard_method_grid(), reps, seed)
    })
}

fn in_pool<T>(workers: Option<usize>, f: impl FnOnce() -> Result<T> + Send) -> Result<T>
where
    T: Send,
{
    match workers {
        None => f(),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| crate::error::Error::Config(e.to_string()))?;
            pool.install(f)
        }
    }
}

fn write_file(path: &Path, content: &str) -> Result<()> {
    fs::write(path, content)?;
    Ok(())
}
