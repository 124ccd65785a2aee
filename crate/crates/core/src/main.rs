//! Command-line front end: single runs, parameter sweeps, and config checks.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use avnet_spectrum::baselines::Scheme;
use avnet_spectrum::harness::{emit_outputs, run_plan, ExperimentConfig, ExperimentPlan, SweepAxis};
use avnet_spectrum::solvers::run_acs;

#[derive(Parser)]
#[command(
    name = "avnet-spectrum",
    about = "Spectrum slicing, allocation, and Wi-Fi power control for vehicular networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one scenario with the proposed scheme and print the solution as JSON.
    Run {
        /// JSON experiment config; defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Scenario seed.
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Sweep one parameter over seeds and schemes, writing CSV (and charts).
    Sweep {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Parameter to vary: spectrum | sensitive-prob | density.
        #[arg(long)]
        axis: SweepAxisArg,
        /// Sweep values (axis units: Hz, probability, or vehicles/m/lane).
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        /// Scenario seeds.
        #[arg(long, value_delimiter = ',', default_values_t = vec![1u64, 2, 3, 4, 5])]
        seeds: Vec<u64>,
        /// Schemes to run (default: all three).
        #[arg(long, value_delimiter = ',')]
        schemes: Option<Vec<SchemeArg>>,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        /// Also write SVG summary charts.
        #[arg(long)]
        plots: bool,
    },
    /// Check a config file and report effective settings.
    Validate {
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

#[derive(Clone)]
struct SweepAxisArg(SweepAxis);

impl std::str::FromStr for SweepAxisArg {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.parse().map(SweepAxisArg)
    }
}

#[derive(Clone)]
struct SchemeArg(Scheme);

impl std::str::FromStr for SchemeArg {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.parse().map(SchemeArg)
    }
}

fn load_config(path: &Option<PathBuf>) -> Result<ExperimentConfig, String> {
    let config = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| format!("cannot read {}: {e}", p.display()))?;
            serde_json::from_str(&text).map_err(|e| format!("bad config: {e}"))?
        }
        None => ExperimentConfig::default(),
    };
    config.validate()?;
    Ok(config)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode, String> {
    match cli.command {
        Command::Run { config, seed } => {
            let config = load_config(&config)?;
            let (scenario, total_hz) = config
                .scenario_at(SweepAxis::AvDensity, config.road.av_density_per_m, seed)?;
            match run_acs(&scenario, total_hz, &config.qos, &config.acs) {
                Ok(solution) => {
                    let json = serde_json::to_string_pretty(&solution)
                        .map_err(|e| e.to_string())?;
                    println!("{json}");
                    Ok(ExitCode::SUCCESS)
                }
                Err(e) => {
                    eprintln!("no solution: {e}");
                    Ok(ExitCode::from(1))
                }
            }
        }
        Command::Sweep {
            config,
            axis,
            values,
            seeds,
            schemes,
            out,
            plots,
        } => {
            let config = load_config(&config)?;
            if values.is_empty() || seeds.is_empty() {
                return Err("values and seeds must be non-empty".into());
            }
            let schemes = schemes
                .map(|s| s.into_iter().map(|a| a.0).collect())
                .unwrap_or_else(|| Scheme::all().to_vec());
            let plan = ExperimentPlan {
                axis: axis.0,
                values,
                seeds,
                schemes,
            };
            let rows = run_plan(&config, &plan);
            emit_outputs(&rows, &out, plots, plan.axis).map_err(|e| e.to_string())?;
            let feasible = rows.iter().filter(|r| r.feasible).count();
            println!(
                "wrote {} rows ({} feasible) to {}",
                rows.len(),
                feasible,
                out.join("results.csv").display()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Validate { config } => {
            let config = load_config(&config)?;
            let json = serde_json::to_string_pretty(&config).map_err(|e| e.to_string())?;
            println!("{json}");
            Ok(ExitCode::SUCCESS)
        }
    }
}
