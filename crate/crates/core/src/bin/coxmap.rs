use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use coxmap::model::Preset;
use coxmap::predict::Estimator;
use coxmap::run::{run, Command, RunConfig};

#[derive(Parser)]
#[command(
    name = "coxmap",
    version,
    about = "Log-Gaussian Cox process intensity mapping"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Fit a model and write effects, intensities and in-sample ROC.
    Fit(Common),
    /// Predict intensities for a pixel table from a saved fit.
    Predict(Common),
    /// Unit-blocked 4-fold cross-validation.
    Cv(Common),
    /// Generate a synthetic dataset.
    Simulate(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    pixels: Option<PathBuf>,
    #[arg(long)]
    adjacency: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Saved fit.json (predict only).
    #[arg(long)]
    fit: Option<PathBuf>,
    #[arg(long)]
    preset: Option<Preset>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    threads: Option<usize>,
    /// plug-in or lognormal
    #[arg(long)]
    estimator: Option<Estimator>,
    /// Overwrite existing output files.
    #[arg(long)]
    force: bool,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("COXMAP_LOG", "warn")).init();
    let cli = Cli::parse();
    let (command, a) = match cli.command {
        Cmd::Fit(a) => (Command::Fit, a),
        Cmd::Predict(a) => (Command::Predict, a),
        Cmd::Cv(a) => (Command::Cv, a),
        Cmd::Simulate(a) => (Command::Simulate, a),
    };
    let config = RunConfig {
        command,
        pixels: a.pixels,
        adjacency: a.adjacency,
        config: a.config,
        fit: a.fit,
        preset: a.preset,
        out: a.out,
        seed: a.seed,
        threads: a.threads,
        estimator: a.estimator,
        force: a.force,
    };
    match run(&config) {
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            let message = e.to_string().replace('\n', " ");
            eprintln!("error[{}]: {message}", e.code());
            ExitCode::FAILURE
        }
    }
}
