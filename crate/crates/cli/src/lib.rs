//! Command-line front end: configuration, the `train`, `evaluate`, `benchmark` and
//! `inspect` commands, and their CSV outputs.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use commands::Overrides;
pub use config::RunConfig;
pub use error::{CliError, ErrorKind};

#[derive(Debug, Parser)]
#[command(name = "irrl", version, about = "Learn daily irrigation decision rules with policy gradients")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone, Default)]
pub struct Common {
    /// TOML run configuration; defaults apply when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Seed for every random stream of the run.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a policy on a pool of weather years.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        episodes: Option<usize>,
        #[arg(long)]
        alpha: Option<f64>,
        /// Directory of training weather CSVs.
        #[arg(long)]
        train_weather: Option<PathBuf>,
    },
    /// Test a checkpoint on held-out years with replicated episodes.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Directory (or single file) of test weather CSVs.
        #[arg(long)]
        test_weather: Option<PathBuf>,
        #[arg(long)]
        replicates: Option<usize>,
        /// Benchmark CSV used to fill the benchmark and performance columns.
        #[arg(long)]
        benchmark: Option<PathBuf>,
        /// Round trace state columns to display precision (stage 1 dp, LAI 2 dp, water whole mm).
        #[arg(long)]
        paper_format: bool,
    },
    /// Search each year separately for its most profitable schedule.
    Benchmark {
        #[command(flatten)]
        common: Common,
        /// Directory (or single file) of weather CSVs.
        #[arg(long)]
        weather: Option<PathBuf>,
        #[arg(long)]
        budget: Option<usize>,
    },
    /// Print a checkpoint's architecture and parameter statistics.
    Inspect { checkpoint: PathBuf },
    /// Write synthetic weather CSVs.
    SynthWeather {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1981)]
        first_year: i32,
        #[arg(long, default_value_t = 10)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn base(common: &Common) -> Overrides {
    Overrides {
        seed: common.seed,
        out: common.out.clone(),
        ..Overrides::default()
    }
}

/// Runs one command and returns what it prints on success.
pub fn run(cli: Cli) -> Result<String, CliError> {
    match cli.command {
        Command::Train {
            common,
            episodes,
            alpha,
            train_weather,
        } => {
            let o = Overrides {
                episodes,
                alpha,
                train_weather,
                ..base(&common)
            };
            let cfg = commands::resolve_config(common.config.as_deref(), &o)?;
            let s = commands::train(&cfg)?;
            Ok(format!(
                "trained {} episodes; best moving average {} at episode {}; output in {}\n",
                s.episodes,
                s.best_ma,
                s.best_episode,
                cfg.out_dir().display()
            ))
        }
        Command::Evaluate {
            common,
            checkpoint,
            test_weather,
            replicates,
            benchmark,
            paper_format,
        } => {
            let o = Overrides {
                checkpoint,
                test_weather,
                replicates,
                benchmark,
                paper_format,
                ..base(&common)
            };
            let cfg = commands::resolve_config(common.config.as_deref(), &o)?;
            let report = commands::evaluate(&cfg)?;
            let mut text = String::new();
            for r in &report.rows {
                text.push_str(&format!(
                    "{}: mean {:.1} (sd {:.1}){}\n",
                    r.year,
                    r.test_profit_mean,
                    r.test_profit_sd,
                    r.performance_pct.map(|p| format!(", {p}% of benchmark")).unwrap_or_default()
                ));
            }
            Ok(text)
        }
        Command::Benchmark { common, weather, budget } => {
            let o = Overrides {
                test_weather: weather,
                budget,
                ..base(&common)
            };
            let cfg = commands::resolve_config(common.config.as_deref(), &o)?;
            let results = commands::benchmark(&cfg)?;
            Ok(results
                .iter()
                .map(|b| format!("{}: best profit {:.1} (zero irrigation {:.1})\n", b.year_id, b.best_profit, b.zero_profit))
                .collect())
        }
        Command::Inspect { checkpoint } => commands::inspect(&checkpoint),
        Command::SynthWeather {
            out,
            first_year,
            count,
            seed,
        } => {
            let files = commands::synth_weather(&out, first_year, count, seed)?;
            Ok(format!("wrote {} weather files to {}\n", files.len(), out.display()))
        }
    }
}
