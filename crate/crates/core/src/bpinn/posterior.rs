//! Log-posterior of one particle and its gradient.
//!
//! All positive latents live in log-space, so [`log_prior`] includes the
//! change-of-variables Jacobian of every one of them.

use rand::Rng;
use rand_distr::{Distribution, Gamma, Normal};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::net::{NetOutput, NetParams};
use crate::pinn::{Batch, Residual};

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

/// Hyperparameters of the prior.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PriorSpec {
    /// Mean of the Gaussian prior on `m` and `d`.
    pub lambda_mean: f64,
    /// Numerator of the prior scale `lambda_scale / P_prec` (a standard deviation).
    pub lambda_scale: f64,
    /// Gamma shape α of the precision variables.
    pub precision_shape: f64,
    /// Gamma rate β of the precision variables.
    pub precision_rate: f64,
    /// Standard deviation of the Gaussian prior on each network weight.
    pub weight_std: f64,
    /// Standard deviation for the time column of `W1`, which also sets the
    /// initial spread of those weights.
    pub time_weight_std: f64,
}

impl Default for PriorSpec {
    fn default() -> Self {
        Self {
            lambda_mean: 1.0,
            lambda_scale: 5.0,
            precision_shape: 1.0,
            precision_rate: 0.1,
            weight_std: 1.0,
            time_weight_std: 20.0,
        }
    }
}

/// Gaussian log-density.
pub fn normal_log_pdf(x: f64, mean: f64, std: f64) -> f64 {
    let z = (x - mean) / std;
    -HALF_LN_2PI - std.ln() - 0.5 * z * z
}

/// Gamma(shape, rate) log-density.
pub fn gamma_log_pdf(x: f64, shape: f64, rate: f64) -> f64 {
    shape * rate.ln() - ln_gamma(shape) + (shape - 1.0) * x.ln() - rate * x
}

/// One ensemble member.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Particle {
    pub theta: NetParams,
    pub log_m: f64,
    pub log_d: f64,
    /// Observation noise scales σ_x for (δ, Δω).
    pub log_sigma_x: [f64; 2],
    /// Residual noise scales σ_h for the two residual components.
    pub log_sigma_h: [f64; 2],
    /// Precision P_prec of the (m, d) prior.
    pub log_p_prec: f64,
}

/// Number of non-network coordinates in a flattened particle.
pub const EXTRA_DIMS: usize = 7;

impl Particle {
    /// Draws `(m, d)`, `P_prec` and both noise scales from the prior; Θ comes
    /// from the network initializer. Non-positive `(m, d)` draws are rejected.
    pub fn sample<R: Rng + ?Sized>(hidden: usize, prior: &PriorSpec, rng: &mut R) -> Self {
        let theta = NetParams::init_with_time_std(hidden, prior.time_weight_std, rng);
        let prec = Gamma::new(prior.precision_shape, 1.0 / prior.precision_rate).unwrap();
        let p_prec: f64 = prec.sample(rng).max(1e-12);
        let lambda_prior = Normal::new(prior.lambda_mean, prior.lambda_scale / p_prec).unwrap();
        let mut positive = || loop {
            let v: f64 = lambda_prior.sample(rng);
            if v > 1e-3 {
                break v;
            }
        };
        let m = positive();
        let d = positive();
        let mut log_sigma = || {
            let tau: f64 = prec.sample(rng);
            -0.5 * tau.max(1e-12).ln()
        };
        let log_sigma_x = [log_sigma(), log_sigma()];
        let log_sigma_h = [log_sigma(), log_sigma()];
        Self {
            theta,
            log_m: m.ln(),
            log_d: d.ln(),
            log_sigma_x,
            log_sigma_h,
            log_p_prec: p_prec.ln(),
        }
    }

    pub fn dim(&self) -> usize {
        self.theta.len() + EXTRA_DIMS
    }

    pub fn m(&self) -> f64 {
        self.log_m.exp()
    }

    pub fn d(&self) -> f64 {
        self.log_d.exp()
    }

    pub fn sigma_x(&self) -> [f64; 2] {
        self.log_sigma_x.map(f64::exp)
    }

    pub fn sigma_h(&self) -> [f64; 2] {
        self.log_sigma_h.map(f64::exp)
    }

    /// Layout: Θ, log m, log d, log σ_x (2), log σ_h (2), log P_prec.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.dim());
        v.extend_from_slice(self.theta.as_slice());
        v.extend([
            self.log_m,
            self.log_d,
            self.log_sigma_x[0],
            self.log_sigma_x[1],
            self.log_sigma_h[0],
            self.log_sigma_h[1],
            self.log_p_prec,
        ]);
        v
    }

    pub fn set_flat(&mut self, v: &[f64]) {
        let n = self.theta.len();
        assert_eq!(v.len(), n + EXTRA_DIMS);
        self.theta.as_mut_slice().copy_from_slice(&v[..n]);
        let e = &v[n..];
        self.log_m = e[0];
        self.log_d = e[1];
        self.log_sigma_x = [e[2], e[3]];
        self.log_sigma_h = [e[4], e[5]];
        self.log_p_prec = e[6];
    }

    pub fn is_finite(&self) -> bool {
        self.to_flat().iter().all(|v| v.is_finite())
    }
}

fn gaussian_sum(residual_sq_sum: f64, count: f64, log_sigma: f64) -> f64 {
    let inv_var = (-2.0 * log_sigma).exp();
    -count * (HALF_LN_2PI + log_sigma) - 0.5 * residual_sq_sum * inv_var
}

/// Gaussian log-likelihood of the measurements under the surrogate.
pub fn log_likelihood_data(particle: &Particle, batch: &Batch) -> f64 {
    let mut ss = [0.0; 2];
    for (x, target) in batch.inputs.iter().zip(&batch.targets) {
        let y = particle.theta.forward(x.t_norm, x.power);
        ss[0] += (y.delta - target.delta).powi(2);
        ss[1] += (y.omega - target.omega).powi(2);
    }
    let n = batch.len() as f64;
    gaussian_sum(ss[0], n, particle.log_sigma_x[0]) + gaussian_sum(ss[1], n, particle.log_sigma_x[1])
}

/// Gaussian log-likelihood of the physics residuals at the batch time stamps.
pub fn log_likelihood_physics(particle: &Particle, batch: &Batch) -> f64 {
    let (m, d) = (particle.m(), particle.d());
    let mut ss = [0.0; 2];
    for x in &batch.inputs {
        let (value, rate) = particle.theta.evaluate(x.t_norm, x.power, batch.duration);
        let r = Residual::new(&value, &rate, m, d, &batch.constants);
        ss[0] += r.h.delta * r.h.delta;
        ss[1] += r.h.omega * r.h.omega;
    }
    let n = batch.len() as f64;
    gaussian_sum(ss[0], n, particle.log_sigma_h[0]) + gaussian_sum(ss[1], n, particle.log_sigma_h[1])
}

/// Log-density of a Gamma prior on the precision `1/σ²`, in the `log σ` coordinate.
fn log_precision_prior(log_sigma: f64, prior: &PriorSpec) -> f64 {
    let tau = (-2.0 * log_sigma).exp();
    gamma_log_pdf(tau, prior.precision_shape, prior.precision_rate) + (2.0 * tau).ln()
}

fn d_log_precision_prior(log_sigma: f64, prior: &PriorSpec) -> f64 {
    // dτ/dlogσ = −2τ; the Jacobian term contributes another −2.
    let tau = (-2.0 * log_sigma).exp();
    -2.0 * (prior.precision_shape - 1.0) + 2.0 * prior.precision_rate * tau - 2.0
}

/// Prior standard deviation of flat network coordinate `i`.
fn weight_prior_std(i: usize, hidden: usize, prior: &PriorSpec) -> f64 {
    if i < 2 * hidden && i.is_multiple_of(2) {
        prior.time_weight_std
    } else {
        prior.weight_std
    }
}

/// Gaussian log prior over the network weights alone.
pub fn log_prior_weights(theta: &NetParams, prior: &PriorSpec) -> f64 {
    let hidden = theta.hidden_size();
    theta
        .as_slice()
        .iter()
        .enumerate()
        .map(|(i, &w)| normal_log_pdf(w, 0.0, weight_prior_std(i, hidden, prior)))
        .sum()
}

/// Log prior of every latent, Jacobians included.
pub fn log_prior(particle: &Particle, prior: &PriorSpec) -> f64 {
    let p_prec = particle.log_p_prec.exp();
    let scale = prior.lambda_scale / p_prec;
    let lambda_term = [particle.log_m, particle.log_d]
        .iter()
        .map(|&lv| normal_log_pdf(lv.exp(), prior.lambda_mean, scale) + lv)
        .sum::<f64>();
    let prec_term =
        gamma_log_pdf(p_prec, prior.precision_shape, prior.precision_rate) + particle.log_p_prec;
    let weight_term = log_prior_weights(&particle.theta, prior);
    let sigma_term: f64 = particle
        .log_sigma_x
        .iter()
        .chain(&particle.log_sigma_h)
        .map(|&ls| log_precision_prior(ls, prior))
        .sum();
    lambda_term + prec_term + weight_term + sigma_term
}

/// Terms of the (unnormalized) log posterior.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LogPosterior {
    pub data: f64,
    pub physics: f64,
    pub prior: f64,
    pub total: f64,
}

pub fn log_posterior(particle: &Particle, batch: &Batch, prior: &PriorSpec) -> LogPosterior {
    let data = log_likelihood_data(particle, batch);
    let physics = log_likelihood_physics(particle, batch);
    let prior = log_prior(particle, prior);
    LogPosterior {
        data,
        physics,
        prior,
        total: data + physics + prior,
    }
}

/// Log posterior and its gradient in the flat layout of [`Particle::to_flat`].
///
/// The data and physics likelihoods are evaluated at the same points, so one
/// reverse pass through the network serves both.
pub fn log_posterior_grad(
    particle: &Particle,
    batch: &Batch,
    prior: &PriorSpec,
) -> Result<(LogPosterior, Vec<f64>)> {
    let (m, d) = (particle.m(), particle.d());
    let inv_var_x = particle.log_sigma_x.map(|ls| (-2.0 * ls).exp());
    let inv_var_h = particle.log_sigma_h.map(|ls| (-2.0 * ls).exp());
    let mut ss_x = [0.0; 2];
    let mut ss_h = [0.0; 2];
    let mut g_log_m = 0.0;
    let mut g_log_d = 0.0;

    let theta_grad = particle
        .theta
        .grad_scalar(&batch.inputs, batch.duration, |i, value, rate| {
            let target = &batch.targets[i];
            let e = [value.delta - target.delta, value.omega - target.omega];
            ss_x[0] += e[0] * e[0];
            ss_x[1] += e[1] * e[1];
            let r = Residual::new(value, rate, m, d, &batch.constants);
            ss_h[0] += r.h.delta * r.h.delta;
            ss_h[1] += r.h.omega * r.h.omega;
            let bar_h = NetOutput::new(-r.h.delta * inv_var_h[0], -r.h.omega * inv_var_h[1]);
            g_log_m += bar_h.omega * r.dh_omega_dlog_m;
            g_log_d += bar_h.omega * r.dh_omega_dlog_d;
            let mut adj = r.adjoint(bar_h);
            adj.value.delta -= e[0] * inv_var_x[0];
            adj.value.omega -= e[1] * inv_var_x[1];
            adj
        })?;

    let n = batch.len() as f64;
    let data = gaussian_sum(ss_x[0], n, particle.log_sigma_x[0])
        + gaussian_sum(ss_x[1], n, particle.log_sigma_x[1]);
    let physics = gaussian_sum(ss_h[0], n, particle.log_sigma_h[0])
        + gaussian_sum(ss_h[1], n, particle.log_sigma_h[1]);
    let prior_value = log_prior(particle, prior);
    let lp = LogPosterior {
        data,
        physics,
        prior: prior_value,
        total: data + physics + prior_value,
    };
    if !lp.total.is_finite() {
        return Err(Error::GradientOverflow);
    }

    let mut grad = Vec::with_capacity(particle.dim());
    let hidden = particle.theta.hidden_size();
    grad.extend(
        theta_grad
            .as_slice()
            .iter()
            .zip(particle.theta.as_slice())
            .enumerate()
            .map(|(i, (g, w))| g - w / weight_prior_std(i, hidden, prior).powi(2)),
    );

    // (m, d) prior: Gaussian at lambda_mean with scale lambda_scale / P_prec.
    let p_prec = particle.log_p_prec.exp();
    let scale = prior.lambda_scale / p_prec;
    let inv_scale_sq = 1.0 / (scale * scale);
    let dlp_dlambda =
        |v: f64| -(v - prior.lambda_mean) * inv_scale_sq * v + 1.0;
    grad.push(g_log_m + dlp_dlambda(m));
    grad.push(g_log_d + dlp_dlambda(d));

    for c in 0..2 {
        grad.push(-n + ss_x[c] * inv_var_x[c] + d_log_precision_prior(particle.log_sigma_x[c], prior));
    }
    for c in 0..2 {
        grad.push(-n + ss_h[c] * inv_var_h[c] + d_log_precision_prior(particle.log_sigma_h[c], prior));
    }

    // log P_prec: each λ term contributes +1 − (v−μ)²/scale², plus the Gamma
    // prior and its Jacobian.
    let sq = (m - prior.lambda_mean).powi(2) + (d - prior.lambda_mean).powi(2);
    grad.push(2.0 - sq * inv_scale_sq + prior.precision_shape - prior.precision_rate * p_prec);

    if grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::GradientOverflow);
    }
    Ok((lp, grad))
}
