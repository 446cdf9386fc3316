//! SINDy regression on clean and noisy data for every preset.

use swingid::dynamics::{add_noise, simulate, NoiseSpec, Preset};
use swingid::harness::percent_errors;
use swingid::sindy;

fn main() -> swingid::Result<()> {
    println!("{:<5} {:>5} {:>8} {:>8} {:>8} {:>8}", "case", "K", "m_hat", "d_hat", "eps_m%", "eps_d%");
    for preset in Preset::ALL {
        let sc = preset.scenario();
        let clean = simulate(&sc, 27.0, 10.0)?;
        for k in [0.0, 0.01, 0.05] {
            let data = add_noise(&clean, &NoiseSpec::new(k, 3))?;
            let e = sindy::estimate(&data, sc.params.power, sc.params.susceptance, 0.0)?;
            let (em, ed) = percent_errors((e.m_hat, e.d_hat), preset.lambda())?;
            println!(
                "{:<5} {:>5.2} {:>8.4} {:>8.4} {:>8.2} {:>8.2} {}",
                preset.name(),
                k,
                e.m_hat,
                e.d_hat,
                em,
                ed,
                e.flags.join(",")
            );
        }
    }
    Ok(())
}
