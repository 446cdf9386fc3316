//! Simulates the four presets and writes clean and noisy trajectory CSVs.
//!
//! cargo run --release --example simulate_scenarios -- [out_dir]

use swingid::dynamics::{add_noise, equilibrium, simulate, NoiseSpec, Preset};

fn main() -> swingid::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "target/trajectories".into());
    std::fs::create_dir_all(&out)?;

    for preset in Preset::ALL {
        let sc = preset.scenario();
        let clean = simulate(&sc, 27.0, 10.0)?;
        let noisy = add_noise(&clean, &NoiseSpec::new(0.05, 1))?;
        let eq = equilibrium(&sc.params)?;
        let end = clean.final_state();
        println!(
            "{preset}: m={} d={}  {} samples  x(27)=({:.5}, {:.2e})  equilibrium delta={:.5}",
            sc.params.inertia,
            sc.params.damping,
            clean.len(),
            end.delta,
            end.omega,
            eq.delta
        );
        clean.save_csv(format!("{out}/{preset}_clean.csv"))?;
        noisy.save_csv(format!("{out}/{preset}_k05.csv"))?;
    }
    println!("wrote CSVs to {out}");
    Ok(())
}
