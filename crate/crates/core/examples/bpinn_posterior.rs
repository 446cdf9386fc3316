//! SVGD posterior over (m, d) on noisy fd2 data, with progress every 1000 iterations.
//!
//! cargo run --release --example bpinn_posterior -- [noise_level] [seed]

use swingid::bpinn::{run_with_observer, BpinnConfig};
use swingid::dynamics::{add_noise, simulate, NoiseSpec, Preset};
use swingid::harness::percent_errors;
use swingid::pinn::ScenarioConstants;

fn main() -> swingid::Result<()> {
    let mut args = std::env::args().skip(1);
    let k: f64 = args.next().map_or(0.05, |s| s.parse().expect("noise level"));
    let seed: u64 = args.next().map_or(0, |s| s.parse().expect("seed"));

    let preset = Preset::Fd2;
    let sc = preset.scenario();
    let data = add_noise(&simulate(&sc, 27.0, 10.0)?, &NoiseSpec::new(k, seed))?;
    let constants = ScenarioConstants {
        power: sc.params.power,
        susceptance: sc.params.susceptance,
    };
    let config = BpinnConfig {
        seed,
        ..BpinnConfig::default()
    };

    let r = run_with_observer(&data, constants, &config, |ens| {
        if ens.iteration % 1000 == 0 {
            let s = ens.summary();
            println!(
                "iter {:>5}  m {:.4} ± {:.4}  d {:.4} ± {:.4}",
                ens.iteration, s.m_mean, s.m_std, s.d_mean, s.d_std
            );
        }
    })?;

    let s = r.summary;
    let (em, ed) = percent_errors((s.m_mean, s.d_mean), preset.lambda())?;
    let (tm, td) = s.tau(preset.lambda());
    println!("{preset} K={k}: eps_m={em:.2}% tau_m={tm:.2}%  eps_d={ed:.2}% tau_d={td:.2}%");
    println!("noise std estimate: delta {:.4}, omega {:.4}", s.sigma_x_mean[0], s.sigma_x_mean[1]);
    println!("{}", serde_json::to_string_pretty(&r.report(Some(preset.lambda())))?);
    Ok(())
}
