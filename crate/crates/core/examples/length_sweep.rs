//! Length sweep for SINDy: shorter windows paired with rising noise.

use swingid::harness::{run_length_sweep, Algorithm, ExperimentSpec};

fn main() -> swingid::Result<()> {
    let spec = ExperimentSpec {
        algorithms: vec![Algorithm::Sindy],
        ..ExperimentSpec::length_sweep()
    };
    for r in run_length_sweep(&spec)?.records {
        println!("{:<4} K={:<5} T={:<5} eps_m={:>6.2}% eps_d={:>6.2}%", r.scenario, r.k, r.t, r.eps_m, r.eps_d);
    }
    Ok(())
}
