//! Sweep runner: noise and length sweeps over the presets, per-cell
//! averaging, reconstruction checks and report files.

mod report;

pub use report::{
    emit_report, read_records, read_records_csv, scatter_rows, spearman, write_records,
    write_records_csv, ReportFormat, ScatterRow, RECORDS_FILE, SCATTER_FILE,
};

use std::cmp::Ordering;
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bpinn::{self, BpinnConfig};
use crate::dynamics::{add_noise, simulate, NoiseSpec, Preset, Scenario, Trajectory, MAX_NOISE_LEVEL};
use crate::error::{Error, Result};
use crate::pinn::{self, PinnConfig, ScenarioConstants};
use crate::sindy;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Sindy,
    Pinn,
    Bpinn,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [Algorithm::Sindy, Algorithm::Pinn, Algorithm::Bpinn];

    pub const fn name(self) -> &'static str {
        match self {
            Algorithm::Sindy => "sindy",
            Algorithm::Pinn => "pinn",
            Algorithm::Bpinn => "bpinn",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sindy" => Ok(Algorithm::Sindy),
            "pinn" => Ok(Algorithm::Pinn),
            "bpinn" => Ok(Algorithm::Bpinn),
            _ => Err(Error::InvalidConfig(format!(
                "unknown algorithm `{s}` (expected sindy, pinn or bpinn)"
            ))),
        }
    }
}

/// Which sweep a spec describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepKind {
    /// Every `K` at every `T`.
    Noise,
    /// `K_grid[i]` paired with `T_grid[i]`.
    Length,
}

impl FromStr for SweepKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "noise" => Ok(SweepKind::Noise),
            "length" => Ok(SweepKind::Length),
            _ => Err(Error::InvalidConfig(format!("unknown sweep kind `{s}`"))),
        }
    }
}

/// Noise levels 0 to 5 % in steps of 1 %.
pub const DEFAULT_K_GRID: [f64; 6] = [0.0, 0.01, 0.02, 0.03, 0.04, 0.05];
pub const DEFAULT_DURATION: f64 = 27.0;
/// Lengths paired with [`DEFAULT_K_GRID`] in the length sweep.
pub const LENGTH_SWEEP_T_GRID: [f64; 6] = [27.0, 24.0, 21.0, 18.0, 15.0, 12.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSpec {
    pub scenarios: Vec<Preset>,
    #[serde(rename = "K_grid")]
    pub k_grid: Vec<f64>,
    #[serde(rename = "T_grid")]
    pub t_grid: Vec<f64>,
    pub n_runs: usize,
    pub algorithms: Vec<Algorithm>,
    pub base_seed: u64,
    /// Sampling rate of the simulated measurements (Hz).
    pub sample_rate: f64,
    /// Permit noise levels above 5 %.
    pub allow_exploration: bool,
    /// Report the mean of per-run errors instead of the error of the mean estimate.
    pub average_errors: bool,
    /// Worker threads; 0 uses the rayon default.
    pub workers: usize,
    /// SINDy thresholding parameter ν.
    pub sindy_threshold: f64,
    pub pinn: PinnConfig,
    pub bpinn: BpinnConfig,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            scenarios: Preset::ALL.to_vec(),
            k_grid: DEFAULT_K_GRID.to_vec(),
            t_grid: vec![DEFAULT_DURATION],
            n_runs: 10,
            algorithms: Algorithm::ALL.to_vec(),
            base_seed: 0,
            sample_rate: 10.0,
            allow_exploration: false,
            average_errors: false,
            workers: 0,
            sindy_threshold: 0.0,
            pinn: PinnConfig::default(),
            bpinn: BpinnConfig::default(),
        }
    }
}

impl ExperimentSpec {
    /// Defaults for a length sweep: the paired `(K, T)` rows.
    pub fn length_sweep() -> Self {
        Self {
            t_grid: LENGTH_SWEEP_T_GRID.to_vec(),
            ..Self::default()
        }
    }

    /// Parses a TOML or JSON document (chosen by extension, TOML otherwise).
    /// For a length sweep a missing `T_grid` defaults to the paired lengths.
    pub fn load(path: impl AsRef<Path>, kind: SweepKind) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        let is_json = path.extension().is_some_and(|e| e == "json");
        Self::parse(&text, is_json, kind)
    }

    pub fn parse(text: &str, is_json: bool, kind: SweepKind) -> Result<Self> {
        let mut doc: serde_json::Value = if is_json {
            serde_json::from_str(text)?
        } else {
            toml::from_str(text)?
        };
        let obj = doc
            .as_object_mut()
            .ok_or_else(|| Error::InvalidConfig("config must be a key-value document".into()))?;
        if kind == SweepKind::Length && !obj.contains_key("T_grid") {
            obj.insert("T_grid".into(), serde_json::json!(LENGTH_SWEEP_T_GRID));
        }
        let spec: Self = serde_json::from_value(doc)
            .map_err(|e| Error::InvalidConfig(e.to_string()))?;
        spec.validate(kind)?;
        Ok(spec)
    }

    pub fn validate(&self, kind: SweepKind) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.k_grid.is_empty() || self.t_grid.is_empty() {
            return bad("K_grid and T_grid must be nonempty".into());
        }
        if self.scenarios.is_empty() {
            return bad("scenarios must be nonempty".into());
        }
        if self.n_runs < 1 {
            return bad("n_runs must be at least 1".into());
        }
        for &k in &self.k_grid {
            if !(k.is_finite() && k >= 0.0) {
                return bad(format!("noise level {k} must be finite and nonnegative"));
            }
            if k > MAX_NOISE_LEVEL && !self.allow_exploration {
                return bad(format!(
                    "noise level {k} exceeds {MAX_NOISE_LEVEL}; set allow_exploration to override"
                ));
            }
        }
        for &t in &self.t_grid {
            if !(t.is_finite() && t > 0.0) {
                return bad(format!("trajectory length {t} must be positive"));
            }
        }
        if !(self.sample_rate.is_finite() && self.sample_rate > 0.0) {
            return bad("sample_rate must be positive".into());
        }
        if kind == SweepKind::Length && self.k_grid.len() != self.t_grid.len() {
            return bad(format!(
                "length sweep pairs K_grid and T_grid, but they have {} and {} entries",
                self.k_grid.len(),
                self.t_grid.len()
            ));
        }
        if !(self.sindy_threshold.is_finite() && self.sindy_threshold >= 0.0) {
            return bad("sindy_threshold must be nonnegative".into());
        }
        self.pinn.validate()?;
        self.bpinn.validate()?;
        Ok(())
    }

    /// The `(K, T)` rows a sweep of `kind` visits.
    pub fn rows(&self, kind: SweepKind) -> Vec<(f64, f64)> {
        match kind {
            SweepKind::Noise => self
                .t_grid
                .iter()
                .flat_map(|&t| self.k_grid.iter().map(move |&k| (k, t)))
                .collect(),
            SweepKind::Length => self.k_grid.iter().copied().zip(self.t_grid.iter().copied()).collect(),
        }
    }
}

/// One aggregated `(scenario, K, T, algorithm)` cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub scenario: String,
    #[serde(rename = "K")]
    pub k: f64,
    #[serde(rename = "T")]
    pub t: f64,
    pub algorithm: Algorithm,
    pub eps_m: f64,
    pub tau_m: Option<f64>,
    pub eps_d: f64,
    pub tau_d: Option<f64>,
    /// Mean wall-clock time of one estimate.
    pub runtime_s: f64,
    /// Cell seed; run `r` uses `mix(seed, r)`.
    pub seed: u64,
}

impl ResultRecord {
    fn sort_key_cmp(&self, other: &Self) -> Ordering {
        self.scenario
            .cmp(&other.scenario)
            .then(self.k.total_cmp(&other.k))
            .then(self.t.total_cmp(&other.t))
            .then(self.algorithm.cmp(&other.algorithm))
    }
}

/// Sorts records by `(scenario, K, T, algorithm)`.
pub fn sort_records(records: &mut [ResultRecord]) {
    records.sort_by(ResultRecord::sort_key_cmp);
}

/// A run that produced no estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunFailure {
    pub scenario: String,
    #[serde(rename = "K")]
    pub k: f64,
    #[serde(rename = "T")]
    pub t: f64,
    pub algorithm: Algorithm,
    pub run: usize,
    pub seed: u64,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SweepOutcome {
    pub records: Vec<ResultRecord>,
    pub failures: Vec<RunFailure>,
}

/// `|λ̂ − λ| / |λ| · 100`.
pub fn percent_error(estimate: f64, truth: f64) -> Result<f64> {
    if truth == 0.0 {
        return Err(Error::UndefinedError);
    }
    Ok(((estimate - truth) / truth).abs() * 100.0)
}

/// Per-component [`percent_error`].
pub fn percent_errors(estimate: (f64, f64), truth: (f64, f64)) -> Result<(f64, f64)> {
    Ok((percent_error(estimate.0, truth.0)?, percent_error(estimate.1, truth.1)?))
}

/// SplitMix64 finalizer over `a` and `b`.
pub fn mix(a: u64, b: u64) -> u64 {
    let mut z = a ^ b.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of the `(scenario, K, T)` data cell. It depends on the cell's
/// contents rather than its position in a grid, so the same cell gets the
/// same noise in every sweep.
pub fn cell_seed(base_seed: u64, scenario: Preset, k: f64, t: f64) -> u64 {
    let s = mix(mix(base_seed, scenario as u64 + 1), k.to_bits());
    mix(s, t.to_bits())
}

pub fn run_seed(cell_seed: u64, run: usize) -> u64 {
    mix(cell_seed, run as u64)
}

/// Output of one estimator run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub m: f64,
    pub d: f64,
    /// Posterior spread, BPINN only.
    pub spread: Option<(f64, f64)>,
}

/// Every estimator's configuration.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct EstimatorConfigs {
    pub sindy_threshold: f64,
    pub pinn: PinnConfig,
    pub bpinn: BpinnConfig,
}

impl From<&ExperimentSpec> for EstimatorConfigs {
    fn from(spec: &ExperimentSpec) -> Self {
        Self {
            sindy_threshold: spec.sindy_threshold,
            pinn: spec.pinn,
            bpinn: spec.bpinn,
        }
    }
}

/// Runs one estimator on one dataset.
pub fn estimate(
    algorithm: Algorithm,
    data: &Trajectory,
    constants: ScenarioConstants,
    seed: u64,
    configs: &EstimatorConfigs,
) -> Result<Estimate> {
    match algorithm {
        Algorithm::Sindy => {
            let e = sindy::estimate(data, constants.power, constants.susceptance, configs.sindy_threshold)?;
            Ok(Estimate {
                m: e.m_hat,
                d: e.d_hat,
                spread: None,
            })
        }
        Algorithm::Pinn => {
            let config = PinnConfig { seed, ..configs.pinn };
            let r = pinn::train(data, constants, &config)?;
            Ok(Estimate {
                m: r.m_hat,
                d: r.d_hat,
                spread: None,
            })
        }
        Algorithm::Bpinn => {
            let config = BpinnConfig { seed, ..configs.bpinn };
            let s = bpinn::run(data, constants, &config)?.summary;
            Ok(Estimate {
                m: s.m_mean,
                d: s.d_mean,
                spread: Some((s.m_std, s.d_std)),
            })
        }
    }
}

struct RunOutput {
    cell: usize,
    run: usize,
    seed: u64,
    result: Result<Estimate>,
    runtime_s: f64,
}

struct Cell {
    scenario: Preset,
    k: f64,
    t: f64,
    algorithm: Algorithm,
    seed: u64,
}

fn constants_of(scenario: &Scenario) -> ScenarioConstants {
    ScenarioConstants {
        power: scenario.params.power,
        susceptance: scenario.params.susceptance,
    }
}

/// Runs every `(scenario, row, algorithm, run)` and aggregates per cell.
pub fn run_sweep(spec: &ExperimentSpec, kind: SweepKind) -> Result<SweepOutcome> {
    spec.validate(kind)?;
    if spec.algorithms.is_empty() {
        return Ok(SweepOutcome::default());
    }
    let configs = EstimatorConfigs::from(spec);
    let mut cells = Vec::new();
    for &scenario in &spec.scenarios {
        for (k, t) in spec.rows(kind) {
            for &algorithm in &spec.algorithms {
                cells.push(Cell {
                    scenario,
                    k,
                    t,
                    algorithm,
                    seed: cell_seed(spec.base_seed, scenario, k, t),
                });
            }
        }
    }
    let tasks: Vec<(usize, usize)> = (0..cells.len())
        .flat_map(|c| (0..spec.n_runs).map(move |r| (c, r)))
        .collect();

    let execute = |&(c, r): &(usize, usize)| {
        let cell = &cells[c];
        let seed = run_seed(cell.seed, r);
        let scenario = cell.scenario.scenario();
        let mut runtime_s = 0.0;
        let result = simulate(&scenario, cell.t, spec.sample_rate)
            .and_then(|clean| {
                let noise = NoiseSpec {
                    level: cell.k,
                    seed,
                    allow_exploration: spec.allow_exploration,
                };
                add_noise(&clean, &noise)
            })
            .and_then(|data| {
                let start = Instant::now();
                let e = estimate(cell.algorithm, &data, constants_of(&scenario), seed, &configs);
                runtime_s = start.elapsed().as_secs_f64();
                e
            });
        RunOutput {
            cell: c,
            run: r,
            seed,
            result,
            runtime_s,
        }
    };
    let outputs: Vec<RunOutput> = if spec.workers == 0 {
        tasks.par_iter().map(execute).collect()
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(spec.workers)
            .build()
            .map_err(|e| Error::InvalidConfig(e.to_string()))?
            .install(|| tasks.par_iter().map(execute).collect())
    };

    let mut outcome = SweepOutcome::default();
    let mut per_cell: Vec<Vec<(Estimate, f64)>> = (0..cells.len()).map(|_| Vec::new()).collect();
    for out in outputs {
        let cell = &cells[out.cell];
        match out.result {
            Ok(e) => per_cell[out.cell].push((e, out.runtime_s)),
            Err(err) => {
                log::warn!(
                    "{} K={} T={} {} run {} failed: {err}",
                    cell.scenario,
                    cell.k,
                    cell.t,
                    cell.algorithm,
                    out.run
                );
                outcome.failures.push(RunFailure {
                    scenario: cell.scenario.to_string(),
                    k: cell.k,
                    t: cell.t,
                    algorithm: cell.algorithm,
                    run: out.run,
                    seed: out.seed,
                    error: err.to_string(),
                })
            }
        }
    }
    for (cell, runs) in cells.iter().zip(&per_cell) {
        if runs.is_empty() {
            continue;
        }
        let estimates: Vec<Estimate> = runs.iter().map(|(e, _)| *e).collect();
        let runtime_s = runs.iter().map(|(_, s)| s).sum::<f64>() / runs.len() as f64;
        let agg = aggregate(&estimates, cell.scenario.lambda(), spec.average_errors)?;
        outcome.records.push(ResultRecord {
            scenario: cell.scenario.to_string(),
            k: cell.k,
            t: cell.t,
            algorithm: cell.algorithm,
            eps_m: agg.eps_m,
            tau_m: agg.tau.map(|t| t.0),
            eps_d: agg.eps_d,
            tau_d: agg.tau.map(|t| t.1),
            runtime_s,
            seed: cell.seed,
        });
    }
    sort_records(&mut outcome.records);
    outcome
        .failures
        .sort_by(|a, b| (&a.scenario, a.algorithm, a.run).cmp(&(&b.scenario, b.algorithm, b.run)).then(a.k.total_cmp(&b.k)).then(a.t.total_cmp(&b.t)));
    Ok(outcome)
}

pub fn run_noise_sweep(spec: &ExperimentSpec) -> Result<SweepOutcome> {
    run_sweep(spec, SweepKind::Noise)
}

pub fn run_length_sweep(spec: &ExperimentSpec) -> Result<SweepOutcome> {
    run_sweep(spec, SweepKind::Length)
}

/// Errors and normalized spreads of one cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellSummary {
    pub eps_m: f64,
    pub eps_d: f64,
    pub tau: Option<(f64, f64)>,
}

/// Averages the estimates (or their errors, when `average_errors`) and the
/// posterior spreads of one cell.
pub fn aggregate(estimates: &[Estimate], truth: (f64, f64), average_errors: bool) -> Result<CellSummary> {
    if estimates.is_empty() {
        return Err(Error::InvalidConfig("no estimates to aggregate".into()));
    }
    let n = estimates.len() as f64;
    let (eps_m, eps_d) = if average_errors {
        let mut sum = (0.0, 0.0);
        for e in estimates {
            let (a, b) = percent_errors((e.m, e.d), truth)?;
            sum.0 += a;
            sum.1 += b;
        }
        (sum.0 / n, sum.1 / n)
    } else {
        let m = estimates.iter().map(|e| e.m).sum::<f64>() / n;
        let d = estimates.iter().map(|e| e.d).sum::<f64>() / n;
        percent_errors((m, d), truth)?
    };
    let spreads: Vec<(f64, f64)> = estimates.iter().filter_map(|e| e.spread).collect();
    let tau = (!spreads.is_empty()).then(|| {
        let k = spreads.len() as f64;
        let sm = spreads.iter().map(|s| s.0).sum::<f64>() / k;
        let sd = spreads.iter().map(|s| s.1).sum::<f64>() / k;
        (100.0 * sm / truth.0, 100.0 * sd / truth.1)
    });
    Ok(CellSummary { eps_m, eps_d, tau })
}

/// Trajectory simulated with estimated parameters and its error against the truth.
#[derive(Debug, Clone)]
pub struct Reconstruction {
    pub trajectory: Trajectory,
    pub rmse_delta: f64,
    pub rmse_omega: f64,
    /// `rmse_omega` divided by the RMS of the true `Δω`.
    pub relative_rmse_omega: f64,
}

/// Re-simulates `truth` with `(m̂, d̂)` and compares against the true trajectory.
pub fn reconstruct(truth: &Scenario, lambda_hat: (f64, f64), duration: f64, sample_rate: f64) -> Result<Reconstruction> {
    let params = truth.params.with_lambda(lambda_hat.0, lambda_hat.1)?;
    let estimated = Scenario::custom(format!("{}-estimated", truth.name), params, truth.x0)?;
    let reference = simulate(truth, duration, sample_rate)?;
    let trajectory = simulate(&estimated, duration, sample_rate)?;
    let n = reference.len() as f64;
    let rms = |f: &dyn Fn(usize) -> f64| ((0..reference.len()).map(|i| f(i).powi(2)).sum::<f64>() / n).sqrt();
    let (a, b) = (reference.states(), trajectory.states());
    let rmse_delta = rms(&|i| a[i].delta - b[i].delta);
    let rmse_omega = rms(&|i| a[i].omega - b[i].omega);
    let signal = rms(&|i| a[i].omega);
    Ok(Reconstruction {
        rmse_delta,
        rmse_omega,
        relative_rmse_omega: if signal > 0.0 { rmse_omega / signal } else { f64::INFINITY },
        trajectory,
    })
}
