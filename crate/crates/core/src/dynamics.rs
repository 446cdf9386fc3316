//! Single-machine infinite-bus model.
//!
//! ```text
//! dδ/dt  = Δω
//! dΔω/dt = (P − d·Δω − B·sin δ) / m
//! ```
//!
//! Trajectories are integrated with fixed-step classic Runge–Kutta and
//! subsampled onto a uniform measurement grid. Measurement noise is additive
//! Gaussian with a per-channel standard deviation proportional to the mean
//! absolute value of that channel.

use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Internal integration step used by [`simulate`], in seconds.
pub const DEFAULT_INTERNAL_STEP: f64 = 1e-3;

/// Upper end of the noise levels considered physically meaningful.
pub const MAX_NOISE_LEVEL: f64 = 0.05;

/// Default active power and susceptance shared by all preset scenarios.
pub const PRESET_POWER: f64 = 0.1;
pub const PRESET_SUSCEPTANCE: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    /// Inertia `m` (p.u.).
    pub inertia: f64,
    /// Damping `d` (p.u.).
    pub damping: f64,
    /// Susceptance matrix entry `B` (p.u.).
    pub susceptance: f64,
    /// Active power `P` (p.u.).
    pub power: f64,
}

impl SystemParams {
    pub fn new(inertia: f64, damping: f64, susceptance: f64, power: f64) -> Result<Self> {
        let params = Self {
            inertia,
            damping,
            susceptance,
            power,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.inertia, self.damping, self.susceptance, self.power];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParams(format!("non-finite field in {self:?}")));
        }
        if self.inertia <= 0.0 {
            return Err(Error::InvalidParams(format!(
                "inertia must be positive, got {}",
                self.inertia
            )));
        }
        if self.susceptance <= 0.0 {
            return Err(Error::InvalidParams(format!(
                "susceptance must be positive, got {}",
                self.susceptance
            )));
        }
        if self.damping < 0.0 {
            return Err(Error::InvalidParams(format!(
                "damping must be nonnegative, got {}",
                self.damping
            )));
        }
        Ok(())
    }

    /// Same system with a different (inertia, damping) pair.
    pub fn with_lambda(&self, inertia: f64, damping: f64) -> Result<Self> {
        Self::new(inertia, damping, self.susceptance, self.power)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct State {
    /// Rotor angle δ (rad).
    pub delta: f64,
    /// Frequency deviation Δω.
    pub omega: f64,
}

impl State {
    pub const fn new(delta: f64, omega: f64) -> Self {
        Self { delta, omega }
    }

    pub fn is_finite(&self) -> bool {
        self.delta.is_finite() && self.omega.is_finite()
    }

    fn axpy(&self, a: f64, x: &State) -> State {
        State::new(self.delta + a * x.delta, self.omega + a * x.omega)
    }

    pub fn max_abs_diff(&self, other: &State) -> f64 {
        (self.delta - other.delta)
            .abs()
            .max((self.omega - other.omega).abs())
    }
}

/// The four evaluation scenarios, ordered from fast to slow dynamics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Fd1,
    Fd2,
    Sd1,
    Sd2,
}

impl Preset {
    pub const ALL: [Preset; 4] = [Preset::Fd1, Preset::Fd2, Preset::Sd1, Preset::Sd2];

    /// (inertia, damping) of the preset.
    pub const fn lambda(self) -> (f64, f64) {
        match self {
            Preset::Fd1 => (0.3, 0.15),
            Preset::Fd2 => (0.6, 0.3),
            Preset::Sd1 => (1.4, 1.1),
            Preset::Sd2 => (1.7, 1.4),
        }
    }

    pub const fn name(self) -> &'static str {
        match self {
            Preset::Fd1 => "fd1",
            Preset::Fd2 => "fd2",
            Preset::Sd1 => "sd1",
            Preset::Sd2 => "sd2",
        }
    }

    pub fn scenario(self) -> Scenario {
        let (inertia, damping) = self.lambda();
        Scenario {
            name: self.name().to_string(),
            params: SystemParams {
                inertia,
                damping,
                susceptance: PRESET_SUSCEPTANCE,
                power: PRESET_POWER,
            },
            x0: State::default(),
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fd1" => Ok(Preset::Fd1),
            "fd2" => Ok(Preset::Fd2),
            "sd1" => Ok(Preset::Sd1),
            "sd2" => Ok(Preset::Sd2),
            _ => Err(Error::UnknownScenario(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub params: SystemParams,
    pub x0: State,
}

impl Scenario {
    pub fn custom(name: impl Into<String>, params: SystemParams, x0: State) -> Result<Self> {
        params.validate()?;
        if !x0.is_finite() {
            return Err(Error::InvalidParams("non-finite initial state".into()));
        }
        Ok(Self {
            name: name.into(),
            params,
            x0,
        })
    }
}

/// Uniformly sampled sequence of states.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    times: Vec<f64>,
    states: Vec<State>,
    sample_rate: f64,
}

impl Trajectory {
    pub fn new(times: Vec<f64>, states: Vec<State>, sample_rate: f64) -> Result<Self> {
        if times.len() != states.len() {
            return Err(Error::InvalidTrajectory(format!(
                "{} time stamps but {} states",
                times.len(),
                states.len()
            )));
        }
        if times.len() < 2 {
            return Err(Error::InvalidTrajectory(format!(
                "need at least 2 samples, got {}",
                times.len()
            )));
        }
        if !(sample_rate.is_finite() && sample_rate > 0.0) {
            return Err(Error::InvalidTrajectory(format!(
                "sample rate must be positive, got {sample_rate}"
            )));
        }
        let dt = 1.0 / sample_rate;
        for (i, w) in times.windows(2).enumerate() {
            let tol = 1e-12 * (1.0 + w[1].abs());
            if !((w[1] - w[0]) - dt).abs().le(&tol) {
                return Err(Error::InvalidTrajectory(format!(
                    "non-uniform spacing between samples {i} and {}",
                    i + 1
                )));
            }
        }
        if let Some(i) = states.iter().position(|s| !s.is_finite()) {
            return Err(Error::InvalidTrajectory(format!("non-finite state at sample {i}")));
        }
        Ok(Self {
            times,
            states,
            sample_rate,
        })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn states(&self) -> &[State] {
        &self.states
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn step(&self) -> f64 {
        1.0 / self.sample_rate
    }

    /// Number of samples `N`.
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Time span covered by the samples, `t_last − t_first`.
    pub fn duration(&self) -> f64 {
        self.times[self.times.len() - 1] - self.times[0]
    }

    pub fn deltas(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.delta).collect()
    }

    pub fn omegas(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.omega).collect()
    }

    pub fn final_state(&self) -> State {
        self.states[self.states.len() - 1]
    }

    /// Writes the `t,delta,omega` CSV format.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["t", "delta", "omega"])?;
        for (t, s) in self.times.iter().zip(&self.states) {
            w.write_record([
                format!("{t:.16e}"),
                format!("{:.16e}", s.delta),
                format!("{:.16e}", s.omega),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let headers = r.headers()?.clone();
        let names: Vec<&str> = headers.iter().map(str::trim).collect();
        if names != ["t", "delta", "omega"] {
            return Err(Error::InvalidTrajectory(format!(
                "expected header `t,delta,omega`, found `{}`",
                names.join(",")
            )));
        }
        let mut times = Vec::new();
        let mut states = Vec::new();
        for (row, record) in r.records().enumerate() {
            let record = record?;
            let field = |k: usize| -> Result<f64> {
                record
                    .get(k)
                    .ok_or_else(|| Error::InvalidTrajectory(format!("row {row}: missing column {k}")))?
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| Error::InvalidTrajectory(format!("row {row}: {e}")))
            };
            times.push(field(0)?);
            states.push(State::new(field(1)?, field(2)?));
        }
        if times.len() < 2 {
            return Err(Error::InvalidTrajectory(format!(
                "need at least 2 samples, got {}",
                times.len()
            )));
        }
        let rate = (times.len() - 1) as f64 / (times[times.len() - 1] - times[0]);
        Trajectory::new(times, states, rate)
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(file))
    }

    pub fn load_csv(path: impl AsRef<Path>) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::read_csv(std::io::BufReader::new(file))
    }
}

/// Right-hand side of the swing equation: `(dδ/dt, dΔω/dt)`.
pub fn swing_rhs(state: &State, params: &SystemParams) -> State {
    State::new(
        state.omega,
        (params.power - params.damping * state.omega - params.susceptance * state.delta.sin())
            / params.inertia,
    )
}

fn rk4_step(state: &State, params: &SystemParams, h: f64) -> State {
    let k1 = swing_rhs(state, params);
    let k2 = swing_rhs(&state.axpy(0.5 * h, &k1), params);
    let k3 = swing_rhs(&state.axpy(0.5 * h, &k2), params);
    let k4 = swing_rhs(&state.axpy(h, &k3), params);
    State::new(
        state.delta + h / 6.0 * (k1.delta + 2.0 * k2.delta + 2.0 * k3.delta + k4.delta),
        state.omega + h / 6.0 * (k1.omega + 2.0 * k2.omega + 2.0 * k3.omega + k4.omega),
    )
}

/// Integrates `scenario` over `[0, duration]` and samples at `sample_rate`.
pub fn simulate(scenario: &Scenario, duration: f64, sample_rate: f64) -> Result<Trajectory> {
    simulate_with_step(scenario, duration, sample_rate, DEFAULT_INTERNAL_STEP)
}

/// As [`simulate`], with an explicit upper bound on the internal RK4 step.
///
/// The step actually used divides the sampling interval evenly, so every
/// sample lands on an integration node.
pub fn simulate_with_step(
    scenario: &Scenario,
    duration: f64,
    sample_rate: f64,
    max_step: f64,
) -> Result<Trajectory> {
    scenario.params.validate()?;
    if !(duration.is_finite() && duration > 0.0) {
        return Err(Error::InvalidConfig(format!("duration must be positive, got {duration}")));
    }
    if !(sample_rate.is_finite() && sample_rate > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "sample rate must be positive, got {sample_rate}"
        )));
    }
    if !(max_step.is_finite() && max_step > 0.0) {
        return Err(Error::InvalidConfig(format!("step must be positive, got {max_step}")));
    }
    let dt = 1.0 / sample_rate;
    let substeps = ((dt / max_step) - 1e-9).ceil().max(1.0) as usize;
    let h = dt / substeps as f64;
    let n_samples = (duration * sample_rate + 1e-9).floor() as usize + 1;

    let mut times = Vec::with_capacity(n_samples);
    let mut states = Vec::with_capacity(n_samples);
    let mut x = scenario.x0;
    times.push(0.0);
    states.push(x);
    for i in 1..n_samples {
        for k in 0..substeps {
            x = rk4_step(&x, &scenario.params, h);
            if !x.is_finite() {
                let time = (i - 1) as f64 * dt + (k + 1) as f64 * h;
                return Err(Error::IntegrationDiverged { time });
            }
        }
        times.push(i as f64 / sample_rate);
        states.push(x);
    }
    Trajectory::new(times, states, sample_rate)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    /// Relative noise level `K`.
    pub level: f64,
    pub seed: u64,
    /// Permit levels above [`MAX_NOISE_LEVEL`].
    #[serde(default)]
    pub allow_exploration: bool,
}

impl NoiseSpec {
    pub fn new(level: f64, seed: u64) -> Self {
        Self {
            level,
            seed,
            allow_exploration: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.level.is_finite() || self.level < 0.0 {
            return Err(Error::InvalidNoise(format!(
                "noise level must be finite and nonnegative, got {}",
                self.level
            )));
        }
        if self.level > MAX_NOISE_LEVEL && !self.allow_exploration {
            return Err(Error::InvalidNoise(format!(
                "noise level {} exceeds {MAX_NOISE_LEVEL}; set allow_exploration to override",
                self.level
            )));
        }
        Ok(())
    }
}

/// Per-channel noise standard deviations `(γ_δ, γ_ω)` for level `K`.
pub fn noise_scales(traj: &Trajectory, level: f64) -> (f64, f64) {
    let n = traj.len() as f64;
    let mean_abs_delta = traj.states.iter().map(|s| s.delta.abs()).sum::<f64>() / n;
    let mean_abs_omega = traj.states.iter().map(|s| s.omega.abs()).sum::<f64>() / n;
    (mean_abs_delta * level, mean_abs_omega * level)
}

/// Adds independent zero-mean Gaussian noise to both channels.
pub fn add_noise(traj: &Trajectory, spec: &NoiseSpec) -> Result<Trajectory> {
    spec.validate()?;
    if spec.level == 0.0 {
        return Ok(traj.clone());
    }
    let (gamma_delta, gamma_omega) = noise_scales(traj, spec.level);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut states = traj.states.clone();
    for s in states.iter_mut() {
        let z: f64 = StandardNormal.sample(&mut rng);
        s.delta += gamma_delta * z;
    }
    for s in states.iter_mut() {
        let z: f64 = StandardNormal.sample(&mut rng);
        s.omega += gamma_omega * z;
    }
    Trajectory::new(traj.times.clone(), states, traj.sample_rate)
}

/// Stable operating point `(asin(P/B), 0)`.
pub fn equilibrium(params: &SystemParams) -> Result<State> {
    let ratio = params.power / params.susceptance;
    if ratio.abs() > 1.0 {
        return Err(Error::NoEquilibrium { ratio: ratio.abs() });
    }
    Ok(State::new(ratio.asin(), 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_6};

    fn fd1() -> SystemParams {
        Preset::Fd1.scenario().params
    }

    #[test]
    fn rhs_at_origin() {
        let f = swing_rhs(&State::new(0.0, 0.0), &fd1());
        assert_eq!(f.delta, 0.0);
        assert!((f.omega - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn rhs_vanishes_at_fixed_point() {
        let f = swing_rhs(&State::new(FRAC_PI_6, 0.0), &fd1());
        assert_eq!(f.delta, 0.0);
        assert!(f.omega.abs() < 1e-15);
    }

    #[test]
    fn rhs_undamped_unit_speed() {
        let params = SystemParams::new(0.5, 0.0, 7.0, 0.25).unwrap();
        let f = swing_rhs(&State::new(0.0, 1.0), &params);
        assert_eq!(f.delta, 1.0);
        assert!((f.omega - 0.5).abs() < 1e-15);
    }

    #[test]
    fn params_validation() {
        assert!(SystemParams::new(0.0, 0.1, 0.2, 0.1).is_err());
        assert!(SystemParams::new(0.3, -0.1, 0.2, 0.1).is_err());
        assert!(SystemParams::new(0.3, 0.1, 0.0, 0.1).is_err());
        assert!(SystemParams::new(0.3, 0.1, 0.2, f64::NAN).is_err());
        assert!(SystemParams::new(0.3, 0.0, 0.2, -0.1).is_ok());
    }

    #[test]
    fn presets_match_table() {
        let expected = [(0.3, 0.15), (0.6, 0.3), (1.4, 1.1), (1.7, 1.4)];
        for (preset, (m, d)) in Preset::ALL.iter().zip(expected) {
            let s = preset.scenario();
            assert_eq!((s.params.inertia, s.params.damping), (m, d));
            assert_eq!(s.params.susceptance, 0.2);
            assert_eq!(s.params.power, 0.1);
            assert_eq!(s.x0, State::default());
            assert_eq!(preset.name().parse::<Preset>().unwrap(), *preset);
        }
        assert!("xx9".parse::<Preset>().is_err());
    }

    #[test]
    fn equilibrium_cases() {
        let eq = equilibrium(&fd1()).unwrap();
        assert!((eq.delta - std::f64::consts::FRAC_PI_6).abs() < 1e-6);
        assert_eq!(eq.omega, 0.0);

        let unloaded = SystemParams::new(0.3, 0.15, 0.2, 0.0).unwrap();
        assert_eq!(equilibrium(&unloaded).unwrap(), State::new(0.0, 0.0));

        let edge = SystemParams::new(0.3, 0.15, 0.2, 0.2).unwrap();
        assert!((equilibrium(&edge).unwrap().delta - FRAC_PI_2).abs() < 1e-15);

        let over = SystemParams::new(0.3, 0.15, 0.2, 0.3).unwrap();
        assert!(matches!(equilibrium(&over), Err(Error::NoEquilibrium { .. })));
    }

    #[test]
    fn simulate_starts_at_initial_state_and_settles() {
        let traj = simulate(&Preset::Fd1.scenario(), 27.0, 10.0).unwrap();
        assert_eq!(traj.len(), 271);
        assert_eq!(traj.states()[0], State::default());
        assert!((traj.duration() - 27.0).abs() < 1e-12);
        let last = traj.final_state();
        assert!((last.delta - FRAC_PI_6).abs() < 1e-3, "{last:?}");
        assert!(last.omega.abs() < 1e-3, "{last:?}");
    }

    #[test]
    fn step_halving_is_self_consistent() {
        for preset in Preset::ALL {
            let sc = preset.scenario();
            let a = simulate_with_step(&sc, 27.0, 10.0, 1e-3).unwrap();
            let b = simulate_with_step(&sc, 27.0, 10.0, 5e-4).unwrap();
            let worst = a
                .states()
                .iter()
                .zip(b.states())
                .map(|(x, y)| x.max_abs_diff(y))
                .fold(0.0, f64::max);
            assert!(worst < 1e-8, "{preset}: {worst:e}");
        }
    }

    #[test]
    fn divergence_reports_time() {
        let params = SystemParams {
            inertia: 1e-3,
            damping: 0.0,
            susceptance: 1.0,
            power: 0.0,
        };
        let sc = Scenario {
            name: "blowup".into(),
            params,
            x0: State::new(1.0, 1e308),
        };
        let err = simulate_with_step(&sc, 10.0, 1.0, 1.0).unwrap_err();
        match err {
            Error::IntegrationDiverged { time } => assert!(time > 0.0 && time <= 10.0),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn zero_noise_is_identity() {
        let traj = simulate(&Preset::Fd2.scenario(), 10.0, 10.0).unwrap();
        let noisy = add_noise(&traj, &NoiseSpec::new(0.0, 7)).unwrap();
        assert_eq!(traj, noisy);
    }

    #[test]
    fn noise_is_deterministic_per_seed() {
        let traj = simulate(&Preset::Fd2.scenario(), 10.0, 10.0).unwrap();
        let a = add_noise(&traj, &NoiseSpec::new(0.03, 11)).unwrap();
        let b = add_noise(&traj, &NoiseSpec::new(0.03, 11)).unwrap();
        let c = add_noise(&traj, &NoiseSpec::new(0.03, 12)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn noise_level_bounds() {
        let traj = simulate(&Preset::Fd2.scenario(), 2.0, 10.0).unwrap();
        assert!(matches!(
            add_noise(&traj, &NoiseSpec::new(-0.01, 0)),
            Err(Error::InvalidNoise(_))
        ));
        assert!(add_noise(&traj, &NoiseSpec::new(0.2, 0)).is_err());
        let spec = NoiseSpec {
            level: 0.2,
            seed: 0,
            allow_exploration: true,
        };
        assert!(add_noise(&traj, &spec).is_ok());
    }

    #[test]
    fn trajectory_rejects_bad_input() {
        assert!(Trajectory::new(vec![0.0], vec![State::default()], 10.0).is_err());
        assert!(Trajectory::new(vec![0.0, 0.1], vec![State::default()], 10.0).is_err());
        assert!(Trajectory::new(
            vec![0.0, 0.1, 0.25],
            vec![State::default(); 3],
            10.0
        )
        .is_err());
        assert!(Trajectory::new(
            vec![0.0, 0.1],
            vec![State::default(), State::new(f64::NAN, 0.0)],
            10.0
        )
        .is_err());
    }

    #[test]
    fn csv_rejects_wrong_header() {
        let text = "time,delta,omega\n0,0,0\n0.1,0,0\n";
        assert!(Trajectory::read_csv(text.as_bytes()).is_err());
    }
}
