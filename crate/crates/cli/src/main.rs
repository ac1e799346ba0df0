//! Batch driver: `train`, `evaluate`, `predict` and `report`.

mod config;
mod error;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use chrono::NaiveDate;
use clap::{Parser, Subcommand};

use config::RunConfig;
use error::CliError;

#[derive(Parser)]
#[command(name = "bloomcast", version, about = "Peak-bloom classification from daily temperatures")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// Run configuration (TOML).
    #[arg(long, short)]
    config: PathBuf,
    /// Output directory, overriding `output_dir` from the config.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn load(&self) -> Result<(RunConfig, PathBuf), CliError> {
        let config = RunConfig::load(&self.config)?;
        let out = self.out.clone().unwrap_or_else(|| config.output_dir.clone());
        Ok((config, out))
    }
}

#[derive(Subcommand)]
enum Command {
    /// Train the configured model on the training years.
    Train(Common),
    /// Score a trained model on the test years.
    Evaluate {
        #[command(flatten)]
        common: Common,
        /// Model file; defaults to `<out>/model.json`.
        #[arg(long)]
        model: Option<PathBuf>,
        /// Also write PR curves for an LSTM model.
        #[arg(long)]
        pr_curves: bool,
    },
    /// Classify the window ending on a date.
    Predict {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        model: Option<PathBuf>,
        /// Last day of the window, as YYYY-MM-DD.
        #[arg(long)]
        date: NaiveDate,
    },
    /// Train and evaluate the SVM under all three imbalance regimes.
    Report(Common),
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Train(common) => {
            let (config, out) = common.load()?;
            let path = run::train(&config, &out, None)?;
            println!("{}", path.display());
        }
        Command::Evaluate { common, model, pr_curves } => {
            let (config, out) = common.load()?;
            let model = model.unwrap_or_else(|| out.join("model.json"));
            let e = run::evaluate(&config, &model, &out, pr_curves)?;
            println!(
                "accuracy {:.2}%  precision {:.4}  recall {:.4}  f1 {:.4}",
                e.accuracy, e.precision, e.recall, e.f1
            );
        }
        Command::Predict { common, model, date } => {
            let (config, out) = common.load()?;
            let model = model.unwrap_or_else(|| out.join("model.json"));
            let (class, meaning) = run::predict(&config, &model, date)?;
            println!("{date}: class {class}, {meaning}");
        }
        Command::Report(common) => {
            let (config, out) = common.load()?;
            run::report(&config, &out)?;
            println!("{}", out.join("comparison.csv").display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
