//! Trains a PINN on fd1 and prints the loss curve every few thousand epochs.
//!
//! cargo run --release --example pinn_identification -- [noise_level]

use swingid::dynamics::{add_noise, simulate, NoiseSpec, Preset};
use swingid::harness::percent_errors;
use swingid::pinn::{train, PinnConfig, ScenarioConstants};

fn main() -> swingid::Result<()> {
    let k: f64 = std::env::args().nth(1).map_or(0.0, |s| s.parse().expect("noise level"));
    let sc = Preset::Fd1.scenario();
    let data = add_noise(&simulate(&sc, 27.0, 10.0)?, &NoiseSpec::new(k, 0))?;
    let constants = ScenarioConstants {
        power: sc.params.power,
        susceptance: sc.params.susceptance,
    };
    let config = PinnConfig {
        record_trace: true,
        ..PinnConfig::default()
    };

    let start = std::time::Instant::now();
    let r = train(&data, constants, &config)?;
    for e in r.trace.iter().step_by(5000) {
        println!(
            "epoch {:>6}  data {:.3e}  physics {:.3e}  total {:.3e}",
            e.epoch, e.data_loss, e.physics_loss, e.total
        );
    }
    let (em, ed) = percent_errors((r.m_hat, r.d_hat), Preset::Fd1.lambda())?;
    println!(
        "fd1 K={k}: m_hat={:.5} d_hat={:.5}  eps_m={em:.2}% eps_d={ed:.2}%  ({:.1}s)",
        r.m_hat,
        r.d_hat,
        start.elapsed().as_secs_f64()
    );
    Ok(())
}
