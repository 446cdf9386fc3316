//! Bayesian PINN: an SVGD particle ensemble over network weights, `(m, d)`
//! and the noise scales, summarized by posterior mean and spread.

pub mod posterior;
pub mod svgd;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::Trajectory;
use crate::error::{Error, Result};
use crate::net::DEFAULT_HIDDEN;
use crate::optim::Adam;
use crate::pinn::{Batch, ScenarioConstants};

pub use posterior::{
    gamma_log_pdf, log_likelihood_data, log_likelihood_physics, log_posterior, log_posterior_grad,
    log_prior, log_prior_weights, normal_log_pdf, LogPosterior, Particle, PriorSpec,
};
pub use svgd::{median_bandwidth, stein_direction, svgd_step};

/// How the Stein direction is turned into a particle update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StepRule {
    /// `x ← x + ε φ`.
    Plain,
    /// Adam moments applied to `φ` per particle, with `ε` as learning rate.
    Adam,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BpinnConfig {
    pub n_particles: usize,
    pub iterations: usize,
    pub step_size: f64,
    /// Step size multiplier applied every `decay_every` iterations.
    pub decay_factor: f64,
    /// 0 disables the schedule.
    pub decay_every: usize,
    pub step_rule: StepRule,
    pub seed: u64,
    pub hidden_size: usize,
    /// Starting `(m, d)` shared by all particles; drawn from the prior when absent.
    pub lambda_init: Option<(f64, f64)>,
    pub prior: PriorSpec,
}

impl Default for BpinnConfig {
    fn default() -> Self {
        Self {
            n_particles: 10,
            iterations: 10_000,
            step_size: 1e-2,
            decay_factor: 0.5,
            decay_every: 2500,
            step_rule: StepRule::Adam,
            seed: 0,
            hidden_size: DEFAULT_HIDDEN,
            lambda_init: Some((1.0, 1.0)),
            prior: PriorSpec::default(),
        }
    }
}

impl BpinnConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.into()));
        if self.n_particles < 1 {
            return bad("n_particles must be at least 1");
        }
        if self.iterations < 1 {
            return bad("iterations must be at least 1");
        }
        if !(self.step_size.is_finite() && self.step_size > 0.0) {
            return bad("step_size must be positive");
        }
        if !(self.decay_factor.is_finite() && self.decay_factor > 0.0) {
            return bad("decay_factor must be positive");
        }
        if self.hidden_size < 1 {
            return bad("hidden_size must be at least 1");
        }
        if let Some((m, d)) = self.lambda_init {
            if !(m > 0.0 && d > 0.0 && m.is_finite() && d.is_finite()) {
                return bad("lambda_init must be positive");
            }
        }
        let p = &self.prior;
        if !(p.lambda_scale > 0.0
            && p.precision_shape > 0.0
            && p.precision_rate > 0.0
            && p.weight_std > 0.0
            && p.time_weight_std > 0.0
            && p.lambda_mean.is_finite())
        {
            return bad("prior scales and Gamma parameters must be positive");
        }
        Ok(())
    }

    /// Step size in effect at iteration `it`.
    pub fn step_at(&self, it: usize) -> f64 {
        match self.decay_every {
            0 => self.step_size,
            every => self.step_size * self.decay_factor.powi((it / every) as i32),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    pub particles: Vec<Particle>,
    pub iteration: usize,
}

impl Ensemble {
    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    /// Mean and population standard deviation of `(m, d)` and the mean `σ_x`.
    pub fn summary(&self) -> PosteriorSummary {
        let n = self.len() as f64;
        let stats = |f: &dyn Fn(&Particle) -> f64| {
            let mean = self.particles.iter().map(f).sum::<f64>() / n;
            let var = self.particles.iter().map(|p| (f(p) - mean).powi(2)).sum::<f64>() / n;
            (mean, var.sqrt())
        };
        let (m_mean, m_std) = stats(&Particle::m);
        let (d_mean, d_std) = stats(&Particle::d);
        let sx0 = stats(&|p: &Particle| p.sigma_x()[0]).0;
        let sx1 = stats(&|p: &Particle| p.sigma_x()[1]).0;
        PosteriorSummary {
            m_mean,
            m_std,
            d_mean,
            d_std,
            sigma_x_mean: [sx0, sx1],
        }
    }
}

/// Ensemble mean and spread of the physical parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSummary {
    pub m_mean: f64,
    pub m_std: f64,
    pub d_mean: f64,
    pub d_std: f64,
    pub sigma_x_mean: [f64; 2],
}

impl PosteriorSummary {
    /// Normalized spread `100·std/λ` against the true parameters.
    pub fn tau(&self, lambda_true: (f64, f64)) -> (f64, f64) {
        (
            100.0 * self.m_std / lambda_true.0,
            100.0 * self.d_std / lambda_true.1,
        )
    }

    /// Normalized spread against the posterior means, for data with unknown truth.
    pub fn tau_blind(&self) -> (f64, f64) {
        self.tau((self.m_mean, self.d_mean))
    }
}

/// Which reference normalizes τ.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TauMode {
    Evaluation,
    Blind,
}

/// Serialized result of one BPINN run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BpinnReport {
    pub m_mean: f64,
    pub m_std: f64,
    pub tau_m: f64,
    pub d_mean: f64,
    pub d_std: f64,
    pub tau_d: f64,
    pub sigma_x_mean: [f64; 2],
    pub n_particles: usize,
    pub iterations: usize,
    pub seed: u64,
    pub tau_mode: TauMode,
}

#[derive(Debug, Clone)]
pub struct BpinnResult {
    pub summary: PosteriorSummary,
    pub ensemble: Ensemble,
    pub config: BpinnConfig,
}

impl BpinnResult {
    /// Evaluation mode when `lambda_true` is given, blind mode otherwise.
    pub fn report(&self, lambda_true: Option<(f64, f64)>) -> BpinnReport {
        let s = &self.summary;
        let ((tau_m, tau_d), tau_mode) = match lambda_true {
            Some(l) => (s.tau(l), TauMode::Evaluation),
            None => (s.tau_blind(), TauMode::Blind),
        };
        BpinnReport {
            m_mean: s.m_mean,
            m_std: s.m_std,
            tau_m,
            d_mean: s.d_mean,
            d_std: s.d_std,
            tau_d,
            sigma_x_mean: s.sigma_x_mean,
            n_particles: self.config.n_particles,
            iterations: self.config.iterations,
            seed: self.config.seed,
            tau_mode,
        }
    }
}

/// Draws the initial ensemble from the priors, then applies `lambda_init`.
pub fn init_ensemble(config: &BpinnConfig) -> Ensemble {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let particles = (0..config.n_particles)
        .map(|_| {
            let mut p = Particle::sample(config.hidden_size, &config.prior, &mut rng);
            if let Some((m, d)) = config.lambda_init {
                p.log_m = m.ln();
                p.log_d = d.ln();
            }
            p
        })
        .collect();
    Ensemble {
        particles,
        iteration: 0,
    }
}

/// Runs SVGD from the prior and summarizes the final ensemble.
pub fn run(dataset: &Trajectory, constants: ScenarioConstants, config: &BpinnConfig) -> Result<BpinnResult> {
    run_with_observer(dataset, constants, config, |_| {})
}

/// As [`run`], calling `observe` after every iteration.
pub fn run_with_observer<F>(
    dataset: &Trajectory,
    constants: ScenarioConstants,
    config: &BpinnConfig,
    mut observe: F,
) -> Result<BpinnResult>
where
    F: FnMut(&Ensemble),
{
    config.validate()?;
    let batch = Batch::new(dataset, constants);
    let mut ensemble = init_ensemble(config);
    let mut flats: Vec<Vec<f64>> = ensemble.particles.iter().map(Particle::to_flat).collect();
    let dim = flats[0].len();
    let mut optimizers: Vec<Adam> = (0..config.n_particles)
        .map(|_| Adam::new(dim, config.step_size))
        .collect();

    for it in 0..config.iterations {
        let grads = ensemble
            .particles
            .par_iter()
            .map(|p| log_posterior_grad(p, &batch, &config.prior).map(|(_, g)| g))
            .collect::<Result<Vec<_>>>()
            .map_err(|_| Error::TrainingDiverged { epoch: it })?;
        let (phi, _) = stein_direction(&flats, &grads);
        let step = config.step_at(it);
        for ((x, p), opt) in flats.iter_mut().zip(&phi).zip(&mut optimizers) {
            match config.step_rule {
                StepRule::Plain => x.iter_mut().zip(p).for_each(|(xa, pa)| *xa += step * pa),
                StepRule::Adam => {
                    opt.learning_rate = step;
                    opt.ascend(x, p);
                }
            }
        }
        for (particle, x) in ensemble.particles.iter_mut().zip(&flats) {
            if x.iter().any(|v| !v.is_finite()) {
                return Err(Error::TrainingDiverged { epoch: it });
            }
            particle.set_flat(x);
        }
        ensemble.iteration = it + 1;
        observe(&ensemble);
    }

    Ok(BpinnResult {
        summary: ensemble.summary(),
        ensemble,
        config: *config,
    })
}
