//! Re-simulates each preset with the inertia off by a range of factors and
//! reports how far the frequency trajectory moves.

use swingid::dynamics::Preset;
use swingid::harness::reconstruct;

fn main() -> swingid::Result<()> {
    let factors = [0.85, 0.95, 1.05, 1.15];
    print!("{:<5}", "case");
    for f in factors {
        print!(" {:>9}", format!("m x {f}"));
    }
    println!();
    for preset in Preset::ALL {
        let sc = preset.scenario();
        print!("{:<5}", preset.name());
        for f in factors {
            let r = reconstruct(&sc, (f * sc.params.inertia, sc.params.damping), 27.0, 10.0)?;
            print!(" {:>9.4}", r.relative_rmse_omega);
        }
        println!();
    }
    Ok(())
}
