//! Small noise sweep (SINDy and PINN, three runs per cell) and its report files.
//!
//! cargo run --release --example noise_sweep -- [out_dir]

use swingid::dynamics::Preset;
use swingid::harness::{emit_report, run_noise_sweep, write_records, Algorithm, ExperimentSpec, ReportFormat};
use swingid::pinn::PinnConfig;

fn main() -> swingid::Result<()> {
    env_logger::init();
    let out = std::env::args().nth(1).unwrap_or_else(|| "target/noise_sweep".into());
    let spec = ExperimentSpec {
        scenarios: vec![Preset::Fd1, Preset::Sd2],
        k_grid: vec![0.0, 0.02, 0.05],
        n_runs: 3,
        algorithms: vec![Algorithm::Sindy, Algorithm::Pinn],
        pinn: PinnConfig {
            epochs: 20_000,
            ..PinnConfig::default()
        },
        ..ExperimentSpec::default()
    };

    let outcome = run_noise_sweep(&spec)?;
    println!("scenario  K     algo    eps_m    eps_d   runtime_s");
    for r in &outcome.records {
        println!(
            "{:<9} {:<5} {:<6} {:>7.2} {:>8.2} {:>10.2}",
            r.scenario, r.k, r.algorithm, r.eps_m, r.eps_d, r.runtime_s
        );
    }
    write_records(&out, &outcome)?;
    for path in emit_report(&outcome.records, &out, ReportFormat::Csv)? {
        println!("wrote {}", path.display());
    }
    Ok(())
}
