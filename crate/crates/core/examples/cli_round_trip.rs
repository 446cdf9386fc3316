//! The file formats the CLI reads and writes, exercised in-process:
//! trajectory CSV, SINDy JSON, and network parameters JSON.

use swingid::dynamics::{simulate, Preset, Trajectory};
use swingid::net::NetParams;
use swingid::sindy;

fn main() -> swingid::Result<()> {
    let sc = Preset::Sd1.scenario();
    let traj = simulate(&sc, 5.0, 10.0)?;

    let mut csv = Vec::new();
    traj.write_csv(&mut csv)?;
    let back = Trajectory::read_csv(&csv[..])?;
    assert_eq!(back.states(), traj.states());
    println!("{}", String::from_utf8_lossy(&csv).lines().take(3).collect::<Vec<_>>().join("\n"));

    let e = sindy::estimate(&traj, sc.params.power, sc.params.susceptance, 0.0)?;
    println!("{}", serde_json::to_string(&e)?);

    let net = NetParams::zeros(2);
    println!("{}", serde_json::to_string(&net.to_json())?);
    Ok(())
}
