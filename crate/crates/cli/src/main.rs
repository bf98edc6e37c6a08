use std::fs::File;
use std::io::BufReader;
use std::path::PathBuf;
use std::process::ExitCode;

use cdc_cli::plot::{lcurve_svg, sweep_svg, PlotKind};
use cdc_cli::report::{aggregate, read_sweep_csv};
use cdc_cli::{run_experiment, CliError, Result};
use cdc_core::numerics::CornerConfig;
use cdc_core::stopping::cdc_stop;
use cdc_core::twin::TwinTrace;
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "cdc", version, about = "Cosine-distance early stopping experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every cell of an experiment config.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Find the stop epoch of a recorded trace.
    Corner {
        #[arg(long)]
        trace: PathBuf,
        #[command(flatten)]
        rule: CornerArgs,
        /// Monitor the counterfactual distance instead of the weight distance.
        #[arg(long)]
        counterfactual: bool,
    },
    /// Summarize a sweep CSV per method.
    Report {
        #[arg(long)]
        sweep: PathBuf,
    },
    /// Render a trace or a sweep as SVG.
    Plot {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum)]
        kind: PlotKind,
        #[arg(long)]
        out: PathBuf,
        /// Stop marker epoch for traces; defaults to the threshold-0.2 corner.
        #[arg(long)]
        stop_epoch: Option<usize>,
    },
}

#[derive(Args)]
struct CornerArgs {
    #[arg(long, conflicts_with_all = ["curvature", "delta", "sigma"])]
    theta: Option<f64>,
    #[arg(long, requires = "delta")]
    curvature: bool,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long, default_value_t = 5.0)]
    sigma: f64,
}

impl CornerArgs {
    fn config(&self) -> Result<CornerConfig> {
        let cfg = if self.curvature {
            CornerConfig::curvature(self.delta.unwrap_or_default(), self.sigma)
        } else {
            CornerConfig::threshold(self.theta.unwrap_or(0.2))
        };
        cfg.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(cfg)
    }
}

fn read_trace(path: &PathBuf) -> Result<TwinTrace> {
    Ok(TwinTrace::read_csv(BufReader::new(File::open(path)?))?)
}

fn execute(cmd: Command) -> Result<bool> {
    match cmd {
        Command::Run { config } => {
            let summary = run_experiment(&config)?;
            for f in &summary.failures {
                eprintln!(
                    "failed: lr {} seeds ({}, {}) {}: {}",
                    f.learning_rate,
                    f.seed1,
                    f.seed2,
                    f.method.as_deref().unwrap_or("training"),
                    f.reason
                );
            }
            println!(
                "{} rows, {} failures, artifacts in {}",
                summary.rows.len(),
                summary.failures.len(),
                summary.output_dir.display()
            );
            Ok(summary.succeeded())
        }
        Command::Corner {
            trace,
            rule,
            counterfactual,
        } => {
            let d = cdc_stop(&read_trace(&trace)?, &rule.config()?, counterfactual)?;
            println!("{}", serde_json::to_string_pretty(&d)?);
            Ok(true)
        }
        Command::Report { sweep } => {
            let rows = read_sweep_csv(File::open(&sweep)?)?;
            print!("{}", aggregate(&rows)?.to_markdown());
            Ok(true)
        }
        Command::Plot {
            input,
            kind,
            out,
            stop_epoch,
        } => {
            let svg = match kind {
                PlotKind::Lcurve => {
                    let trace = read_trace(&input)?;
                    let stop = match stop_epoch {
                        Some(e) => Some(e),
                        None => cdc_stop(&trace, &CornerConfig::threshold(0.2), false)
                            .ok()
                            .map(|d| d.epoch),
                    };
                    lcurve_svg(&trace, stop)?
                }
                PlotKind::Sweep => sweep_svg(&read_sweep_csv(File::open(&input)?)?)?,
            };
            std::fs::write(&out, svg)?;
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
