use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use onset_doa::config::load_config;
use onset_doa::eval::{self, Recipe};
use onset_doa::pipeline::{estimate, estimate_baseline};

#[derive(Parser)]
#[command(name = "onset-doa", version, about = "Direction-of-arrival estimation for linear microphone arrays")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate the talker direction in a multichannel WAV file.
    Estimate {
        wav: PathBuf,
        #[arg(long)]
        config: PathBuf,
        /// Use full-band SRP-PHAT instead of the onset pipeline.
        #[arg(long)]
        baseline: bool,
        /// Write the full estimate report as JSON.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Render the captures described by a recipe to WAV files.
    Simulate {
        #[arg(long)]
        recipe: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a recipe's trials and write RMSE / capture-rate metrics.
    Suite {
        #[arg(long)]
        recipe: PathBuf,
        /// .csv for per-trial rows, .json for the full table, else text.
        #[arg(long)]
        report: PathBuf,
        /// Concurrent trials; overrides the recipe (0 = all cores).
        #[arg(long)]
        workers: Option<usize>,
    },
}

fn run(cli: Cli) -> onset_doa::Result<()> {
    match cli.command {
        Command::Estimate {
            wav,
            config,
            baseline,
            report,
        } => {
            let cfg = load_config(&config)?;
            let audio = eval::load_audio(
                &wav,
                cfg.geometry.num_mics(),
                cfg.stft.sample_rate.round() as u32,
            )?;
            let out = if baseline {
                estimate_baseline(&audio, &cfg)?
            } else {
                estimate(&audio, &cfg)?
            };
            for w in &out.warnings {
                eprintln!("warning: {w}");
            }
            println!("{:.1}", out.theta);
            if let Some(path) = report {
                let json = serde_json::to_string_pretty(&out)
                    .map_err(|e| onset_doa::Error::Config(e.to_string()))?;
                std::fs::write(path, json + "\n")?;
            }
        }
        Command::Simulate { recipe, out } => {
            let recipe = Recipe::load(&recipe)?;
            let written = eval::simulate_to_dir(&recipe, &out)?;
            eprintln!("wrote {} captures to {}", written.len(), out.display());
        }
        Command::Suite {
            recipe,
            report,
            workers,
        } => {
            let recipe = Recipe::load(&recipe)?;
            let cfg = recipe.pipeline()?;
            let trials = recipe.trials()?;
            let outcome = eval::run_suite(&trials, &cfg, workers.unwrap_or(recipe.workers))?;
            eval::write_report(&outcome.table, &report)?;
            print!("{}", eval::emit_report(&outcome.table, eval::ReportFormat::Text)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
