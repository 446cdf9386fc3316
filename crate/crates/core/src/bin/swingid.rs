//! Command-line front end: simulate, estimate, sweep, report.
//!
//! Exit codes: 0 success, 2 invalid input, 3 numerical failure, 1 anything else.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::{de::DeserializeOwned, Deserialize};

use swingid::bpinn::{self, BpinnConfig};
use swingid::dynamics::{add_noise, simulate, NoiseSpec, Preset, Trajectory};
use swingid::harness::{self, Algorithm, EstimatorConfigs, ExperimentSpec, ReportFormat, SweepKind};
use swingid::pinn::{self, PinnConfig, ScenarioConstants};
use swingid::{sindy, Error, Result};

#[derive(Parser)]
#[command(name = "swingid", version, about = "Swing-equation parameter identification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a preset and write its (optionally noisy) trajectory as CSV.
    Simulate {
        #[arg(long)]
        scenario: Preset,
        #[arg(long, default_value_t = 27.0)]
        duration: f64,
        #[arg(long, default_value_t = 10.0)]
        rate: f64,
        /// Relative noise level K.
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Permit noise levels above 5 %.
        #[arg(long)]
        allow_exploration: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Estimate inertia and damping from a trajectory CSV.
    Estimate {
        #[arg(long)]
        algo: Algorithm,
        #[arg(long)]
        input: PathBuf,
        /// TOML or JSON with `power` and `susceptance`, optionally `inertia` and `damping`.
        #[arg(long)]
        scenario_constants: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Estimator settings: `sindy_threshold`, `[pinn]`, `[bpinn]`.
        #[arg(long)]
        config: Option<PathBuf>,
        /// PINN only: per-epoch loss trace CSV.
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a noise or length sweep and write records plus a CSV report.
    Sweep {
        #[arg(long)]
        kind: SweepKind,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Turn sweep records into a results table and the τ-vs-ε scatter file.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value = "csv")]
        format: ReportFormat,
    },
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ConstantsFile {
    power: f64,
    susceptance: f64,
    inertia: Option<f64>,
    damping: Option<f64>,
}

fn load_document<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_str(&text).map_err(|e| Error::InvalidConfig(e.to_string()))
    } else {
        toml::from_str(&text).map_err(|e| Error::InvalidConfig(e.to_string()))
    }
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate {
            scenario,
            duration,
            rate,
            noise,
            seed,
            allow_exploration,
            out,
        } => {
            let clean = simulate(&scenario.scenario(), duration, rate)?;
            let spec = NoiseSpec {
                level: noise,
                seed,
                allow_exploration,
            };
            add_noise(&clean, &spec)?.save_csv(&out)?;
            log::info!("wrote {} samples to {}", clean.len(), out.display());
        }
        Command::Estimate {
            algo,
            input,
            scenario_constants,
            seed,
            config,
            trace,
            out,
        } => {
            let data = Trajectory::load_csv(&input)?;
            let file: ConstantsFile = load_document(&scenario_constants)?;
            let constants = ScenarioConstants {
                power: file.power,
                susceptance: file.susceptance,
            };
            let configs: EstimatorConfigs = match config {
                Some(p) => load_document(&p)?,
                None => EstimatorConfigs::default(),
            };
            let truth = file.inertia.zip(file.damping);
            match algo {
                Algorithm::Sindy => {
                    let e = sindy::estimate(&data, constants.power, constants.susceptance, configs.sindy_threshold)?;
                    write_json(&out, &e)?;
                }
                Algorithm::Pinn => {
                    let config = PinnConfig {
                        seed,
                        record_trace: trace.is_some() || configs.pinn.record_trace,
                        ..configs.pinn
                    };
                    let r = pinn::train(&data, constants, &config)?;
                    if let Some(path) = trace {
                        r.write_trace_csv(std::fs::File::create(path)?)?;
                    }
                    write_json(&out, &r.report())?;
                }
                Algorithm::Bpinn => {
                    let config = BpinnConfig { seed, ..configs.bpinn };
                    let r = bpinn::run(&data, constants, &config)?;
                    write_json(&out, &r.report(truth))?;
                }
            }
        }
        Command::Sweep { kind, config, out_dir } => {
            let spec = ExperimentSpec::load(&config, kind)?;
            let outcome = harness::run_sweep(&spec, kind)?;
            let path = harness::write_records(&out_dir, &outcome)?;
            log::info!("wrote {}", path.display());
            if !outcome.failures.is_empty() {
                log::warn!("{} runs failed; see {}", outcome.failures.len(), path.display());
            }
            if !outcome.records.is_empty() {
                harness::emit_report(&outcome.records, &out_dir, ReportFormat::Csv)?;
            }
        }
        Command::Report { input, format } => {
            let outcome = harness::read_records(&input)?;
            for path in harness::emit_report(&outcome.records, &input, format)? {
                println!("{}", path.display());
            }
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
            let code = match &e {
                e if e.is_numerical() => 3,
                Error::Io(_) => 1,
                _ => 2,
            };
            ExitCode::from(code)
        }
    }
}
