//! Physics-informed network: the surrogate weights and `(log m, log d)` are
//! trained jointly on a data misfit plus the swing-equation residual.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::{State, Trajectory};
use crate::error::{Error, Result};
use crate::net::{Adjoint, NetInput, NetOutput, NetParams, DEFAULT_HIDDEN};
use crate::optim::Adam;

/// Known constants of the system being identified.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConstants {
    /// Active power `P` (p.u.).
    pub power: f64,
    /// Susceptance `B` (p.u.).
    pub susceptance: f64,
}

/// Physics residual `h = dx̂/dt − f(x̂; m, d)` and its partial derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Residual {
    pub h: NetOutput,
    /// ∂h_ω/∂δ̂ (∂h_δ/∂δ̂ is zero).
    pub dh_omega_ddelta: f64,
    /// ∂h_ω/∂ω̂ (∂h_δ/∂ω̂ is −1).
    pub dh_omega_domega: f64,
    /// ∂h_ω/∂log m
    pub dh_omega_dlog_m: f64,
    /// ∂h_ω/∂log d
    pub dh_omega_dlog_d: f64,
}

impl Residual {
    pub fn new(value: &NetOutput, rate: &NetOutput, m: f64, d: f64, c: &ScenarioConstants) -> Self {
        let (sin, cos) = value.delta.sin_cos();
        let accel = (c.power - d * value.omega - c.susceptance * sin) / m;
        Self {
            h: NetOutput::new(rate.delta - value.omega, rate.omega - accel),
            dh_omega_ddelta: c.susceptance * cos / m,
            dh_omega_domega: d / m,
            dh_omega_dlog_m: accel,
            dh_omega_dlog_d: d * value.omega / m,
        }
    }

    pub fn norm_sq(&self) -> f64 {
        self.h.delta * self.h.delta + self.h.omega * self.h.omega
    }

    /// Pulls `∂L/∂h` back onto the network outputs.
    pub fn adjoint(&self, bar_h: NetOutput) -> Adjoint {
        Adjoint {
            value: NetOutput::new(
                bar_h.omega * self.dh_omega_ddelta,
                -bar_h.delta + bar_h.omega * self.dh_omega_domega,
            ),
            rate: bar_h,
        }
    }
}

/// Residual of the swing equation along the surrogate at one time point.
pub fn physics_residual(
    theta: &NetParams,
    lambda: (f64, f64),
    t_norm: f64,
    duration: f64,
    constants: &ScenarioConstants,
) -> NetOutput {
    let (value, rate) = theta.evaluate(t_norm, constants.power, duration);
    Residual::new(&value, &rate, lambda.0, lambda.1, constants).h
}

/// Training data shaped for the network: normalized inputs plus targets.
#[derive(Debug, Clone)]
pub struct Batch {
    pub inputs: Vec<NetInput>,
    pub targets: Vec<State>,
    pub duration: f64,
    pub constants: ScenarioConstants,
}

impl Batch {
    pub fn new(traj: &Trajectory, constants: ScenarioConstants) -> Self {
        let t0 = traj.times()[0];
        let duration = traj.duration();
        let inputs = traj
            .times()
            .iter()
            .map(|&t| NetInput {
                t_norm: (t - t0) / duration,
                power: constants.power,
            })
            .collect();
        Self {
            inputs,
            targets: traj.states().to_vec(),
            duration,
            constants,
        }
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }
}

/// Mean squared misfit over samples and both channels.
pub fn data_loss(theta: &NetParams, batch: &Batch) -> f64 {
    let sum: f64 = batch
        .inputs
        .iter()
        .zip(&batch.targets)
        .map(|(x, target)| {
            let y = theta.forward(x.t_norm, x.power);
            let (a, b) = (y.delta - target.delta, y.omega - target.omega);
            a * a + b * b
        })
        .sum();
    sum / (2.0 * batch.len() as f64)
}

/// Mean of `‖h‖²` over the batch time stamps.
pub fn physics_loss(theta: &NetParams, lambda: (f64, f64), batch: &Batch) -> f64 {
    let sum: f64 = batch
        .inputs
        .iter()
        .map(|x| {
            let (value, rate) = theta.evaluate(x.t_norm, x.power, batch.duration);
            Residual::new(&value, &rate, lambda.0, lambda.1, &batch.constants).norm_sq()
        })
        .sum();
    sum / batch.len() as f64
}

/// Value and gradient of `w_data·L_data + w_phys·L_phys`.
#[derive(Debug, Clone)]
pub struct LossGrad {
    pub data_loss: f64,
    pub physics_loss: f64,
    pub total: f64,
    pub theta: NetParams,
    pub log_m: f64,
    pub log_d: f64,
}

pub fn loss_and_grad(
    theta: &NetParams,
    log_m: f64,
    log_d: f64,
    batch: &Batch,
    w_data: f64,
    w_phys: f64,
) -> Result<LossGrad> {
    let (m, d) = (log_m.exp(), log_d.exp());
    let n = batch.len() as f64;
    let mut data = 0.0;
    let mut phys = 0.0;
    let mut g_log_m = 0.0;
    let mut g_log_d = 0.0;
    let grad = theta.grad_scalar(&batch.inputs, batch.duration, |i, value, rate| {
        let target = &batch.targets[i];
        let e = NetOutput::new(value.delta - target.delta, value.omega - target.omega);
        data += e.delta * e.delta + e.omega * e.omega;

        let r = Residual::new(value, rate, m, d, &batch.constants);
        phys += r.norm_sq();
        let bar_h = NetOutput::new(2.0 * w_phys * r.h.delta / n, 2.0 * w_phys * r.h.omega / n);
        g_log_m += bar_h.omega * r.dh_omega_dlog_m;
        g_log_d += bar_h.omega * r.dh_omega_dlog_d;

        let mut adj = r.adjoint(bar_h);
        adj.value.delta += w_data * e.delta / n;
        adj.value.omega += w_data * e.omega / n;
        adj
    })?;
    let data_loss = data / (2.0 * n);
    let physics_loss = phys / n;
    Ok(LossGrad {
        data_loss,
        physics_loss,
        total: w_data * data_loss + w_phys * physics_loss,
        theta: grad,
        log_m: g_log_m,
        log_d: g_log_d,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PinnConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub w_data: f64,
    pub w_phys: f64,
    pub seed: u64,
    /// Initial `(m, d)`.
    pub lambda_init: (f64, f64),
    pub hidden_size: usize,
    /// Initial standard deviation of the time column of `W1`.
    pub time_weight_std: f64,
    /// Keep the per-epoch loss trace in the result.
    pub record_trace: bool,
}

impl Default for PinnConfig {
    fn default() -> Self {
        Self {
            epochs: 50_000,
            learning_rate: 1e-2,
            w_data: 1.0,
            w_phys: 0.3,
            seed: 0,
            lambda_init: (1.0, 1.0),
            hidden_size: DEFAULT_HIDDEN,
            time_weight_std: 5.0,
            record_trace: false,
        }
    }
}

impl PinnConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs < 1 {
            return Err(Error::InvalidConfig("epochs must be at least 1".into()));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::InvalidConfig("learning rate must be positive".into()));
        }
        if !(self.w_data >= 0.0 && self.w_phys >= 0.0) || self.w_data + self.w_phys <= 0.0 {
            return Err(Error::InvalidConfig(
                "loss weights must be nonnegative with at least one positive".into(),
            ));
        }
        let (m0, d0) = self.lambda_init;
        if !(m0 > 0.0 && d0 > 0.0 && m0.is_finite() && d0.is_finite()) {
            return Err(Error::InvalidConfig("lambda_init must be positive".into()));
        }
        if self.hidden_size < 1 {
            return Err(Error::InvalidConfig("hidden_size must be at least 1".into()));
        }
        if !(self.time_weight_std.is_finite() && self.time_weight_std > 0.0) {
            return Err(Error::InvalidConfig("time_weight_std must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub epoch: usize,
    pub data_loss: f64,
    pub physics_loss: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PinnResult {
    pub m_hat: f64,
    pub d_hat: f64,
    pub final_data_loss: f64,
    pub final_physics_loss: f64,
    pub epochs: usize,
    pub seed: u64,
    pub theta: NetParams,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub trace: Vec<EpochLoss>,
}

/// Final loss values of a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FinalLosses {
    pub data: f64,
    pub physics: f64,
}

/// Serialized summary of one PINN run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PinnReport {
    pub m_hat: f64,
    pub d_hat: f64,
    pub losses: FinalLosses,
    pub epochs: usize,
    pub seed: u64,
}

impl PinnResult {
    pub fn report(&self) -> PinnReport {
        PinnReport {
            m_hat: self.m_hat,
            d_hat: self.d_hat,
            losses: FinalLosses {
                data: self.final_data_loss,
                physics: self.final_physics_loss,
            },
            epochs: self.epochs,
            seed: self.seed,
        }
    }

    pub fn write_trace_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for row in &self.trace {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Adam on `w_data·L_data + w_phys·L_phys` over Θ and `(log m, log d)`.
pub fn train(dataset: &Trajectory, constants: ScenarioConstants, config: &PinnConfig) -> Result<PinnResult> {
    config.validate()?;
    let batch = Batch::new(dataset, constants);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut theta = NetParams::init_with_time_std(config.hidden_size, config.time_weight_std, &mut rng);
    let n_theta = theta.len();

    let mut params: Vec<f64> = theta.as_slice().to_vec();
    params.push(config.lambda_init.0.ln());
    params.push(config.lambda_init.1.ln());
    let mut opt = Adam::new(params.len(), config.learning_rate);
    let mut grad = vec![0.0; params.len()];
    let mut trace = Vec::new();

    for epoch in 0..config.epochs {
        theta.as_mut_slice().copy_from_slice(&params[..n_theta]);
        let lg = loss_and_grad(
            &theta,
            params[n_theta],
            params[n_theta + 1],
            &batch,
            config.w_data,
            config.w_phys,
        )
        .map_err(|_| Error::TrainingDiverged { epoch })?;
        if !lg.total.is_finite() {
            return Err(Error::TrainingDiverged { epoch });
        }
        if config.record_trace {
            trace.push(EpochLoss {
                epoch,
                data_loss: lg.data_loss,
                physics_loss: lg.physics_loss,
                total: lg.total,
            });
        }
        grad[..n_theta].copy_from_slice(lg.theta.as_slice());
        grad[n_theta] = lg.log_m;
        grad[n_theta + 1] = lg.log_d;
        opt.descend(&mut params, &grad);
        if params.iter().any(|v| !v.is_finite()) {
            return Err(Error::TrainingDiverged { epoch });
        }
    }

    theta.as_mut_slice().copy_from_slice(&params[..n_theta]);
    let lambda = (params[n_theta].exp(), params[n_theta + 1].exp());
    Ok(PinnResult {
        m_hat: lambda.0,
        d_hat: lambda.1,
        final_data_loss: data_loss(&theta, &batch),
        final_physics_loss: physics_loss(&theta, lambda, &batch),
        epochs: config.epochs,
        seed: config.seed,
        theta,
        trace,
    })
}
