//! One-hidden-layer tanh surrogate `x̂(t, P; Θ)` with exact derivatives.
//!
//! The network maps normalized time `s = t/T` and active power `P` to the
//! two states:
//!
//! ```text
//! z  = W1·[s, P] + b1
//! x̂  = W2·tanh(z) + b2
//! dx̂/dt = (1/T)·W2·diag(1 − tanh²(z))·W1[:, 0]
//! ```
//!
//! Gradients of any scalar built from `x̂` and `dx̂/dt` over a batch are
//! computed in closed form: the caller supplies, per point, the partial
//! derivatives of the scalar with respect to the four outputs (the adjoint),
//! and [`NetParams::grad_scalar`] pulls them back onto every weight.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_HIDDEN: usize = 10;

/// `tanh` through one `exp`; agrees with `f64::tanh` to a few ulps and is
/// about twice as fast, which matters in the training loops.
#[inline]
pub fn tanh(x: f64) -> f64 {
    let e = (-2.0 * x.abs()).exp();
    ((1.0 - e) / (1.0 + e)).copysign(x)
}

/// Network weights Θ in one flat buffer.
///
/// Layout: `W1` (hidden×2, row-major), `b1` (hidden), `W2` (2×hidden,
/// row-major), `b2` (2). The same type doubles as the gradient container.
#[derive(Debug, Clone, PartialEq)]
pub struct NetParams {
    hidden: usize,
    values: Vec<f64>,
}

/// A pair of values, one per state channel.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NetOutput {
    pub delta: f64,
    pub omega: f64,
}

impl NetOutput {
    pub const fn new(delta: f64, omega: f64) -> Self {
        Self { delta, omega }
    }

    fn is_finite(&self) -> bool {
        self.delta.is_finite() && self.omega.is_finite()
    }
}

/// Partial derivatives of a scalar with respect to one point's outputs.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Adjoint {
    /// ∂L/∂x̂
    pub value: NetOutput,
    /// ∂L/∂(dx̂/dt)
    pub rate: NetOutput,
}

/// Network input for one evaluation point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NetInput {
    pub t_norm: f64,
    pub power: f64,
}

impl NetParams {
    pub fn zeros(hidden: usize) -> Self {
        assert!(hidden >= 1, "hidden layer needs at least one unit");
        Self {
            hidden,
            values: vec![0.0; 5 * hidden + 2],
        }
    }

    /// Gaussian initialization with standard deviation `1/√fan_in` for the
    /// hidden layer (weights and biases) and the output weights; `b2 = 0`.
    pub fn init<R: Rng + ?Sized>(hidden: usize, rng: &mut R) -> Self {
        Self::init_with_time_std(hidden, std::f64::consts::FRAC_1_SQRT_2, rng)
    }

    /// Same as [`NetParams::init`] but with its own standard deviation for the
    /// time column of `W1`. Normalized time spans `[0, 1]`, so a unit-scale
    /// column can only represent a fraction of one oscillation.
    pub fn init_with_time_std<R: Rng + ?Sized>(hidden: usize, time_std: f64, rng: &mut R) -> Self {
        let mut p = Self::zeros(hidden);
        let hidden_std = Normal::new(0.0, std::f64::consts::FRAC_1_SQRT_2).unwrap();
        let time_dist = Normal::new(0.0, time_std).unwrap();
        let out_std = Normal::new(0.0, 1.0 / (hidden as f64).sqrt()).unwrap();
        let (w1, b1, w2, _) = p.split_mut();
        for (i, v) in w1.iter_mut().enumerate() {
            *v = if i % 2 == 0 {
                time_dist.sample(rng)
            } else {
                hidden_std.sample(rng)
            };
        }
        for v in b1.iter_mut() {
            *v = hidden_std.sample(rng);
        }
        for v in w2.iter_mut() {
            *v = out_std.sample(rng);
        }
        p
    }

    pub fn from_flat(hidden: usize, values: Vec<f64>) -> Result<Self> {
        if hidden == 0 || values.len() != 5 * hidden + 2 {
            return Err(Error::InvalidConfig(format!(
                "hidden size {hidden} needs {} parameters, got {}",
                5 * hidden + 2,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig("non-finite network parameter".into()));
        }
        Ok(Self { hidden, values })
    }

    pub fn hidden_size(&self) -> usize {
        self.hidden
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn w1(&self) -> &[f64] {
        &self.values[..2 * self.hidden]
    }

    pub fn b1(&self) -> &[f64] {
        &self.values[2 * self.hidden..3 * self.hidden]
    }

    pub fn w2(&self) -> &[f64] {
        &self.values[3 * self.hidden..5 * self.hidden]
    }

    pub fn b2(&self) -> [f64; 2] {
        let n = 5 * self.hidden;
        [self.values[n], self.values[n + 1]]
    }

    /// Mutable views `(W1, b1, W2, b2)`.
    pub fn split_mut(&mut self) -> (&mut [f64], &mut [f64], &mut [f64], &mut [f64]) {
        let h = self.hidden;
        let (w1, rest) = self.values.split_at_mut(2 * h);
        let (b1, rest) = rest.split_at_mut(h);
        let (w2, b2) = rest.split_at_mut(2 * h);
        (w1, b1, w2, b2)
    }

    pub fn dot(&self, other: &NetParams) -> f64 {
        self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.dot(self)
    }

    /// `self += alpha · other`
    pub fn axpy(&mut self, alpha: f64, other: &NetParams) {
        debug_assert_eq!(self.hidden, other.hidden);
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += alpha * b;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Network output `x̂` at one point.
    pub fn forward(&self, t_norm: f64, power: f64) -> NetOutput {
        let h = self.hidden;
        let (w1, b1, w2, b2) = (self.w1(), self.b1(), self.w2(), self.b2());
        let mut out = NetOutput::new(b2[0], b2[1]);
        for k in 0..h {
            let a = tanh(w1[2 * k] * t_norm + w1[2 * k + 1] * power + b1[k]);
            out.delta += w2[k] * a;
            out.omega += w2[h + k] * a;
        }
        out
    }

    /// `dx̂/dt` in physical time for a trajectory of length `duration`.
    pub fn time_derivative(&self, t_norm: f64, power: f64, duration: f64) -> NetOutput {
        self.evaluate(t_norm, power, duration).1
    }

    /// `(x̂, dx̂/dt)` at one point.
    pub fn evaluate(&self, t_norm: f64, power: f64, duration: f64) -> (NetOutput, NetOutput) {
        let h = self.hidden;
        let (w1, b1, w2, b2) = (self.w1(), self.b1(), self.w2(), self.b2());
        let inv_t = 1.0 / duration;
        let mut value = NetOutput::new(b2[0], b2[1]);
        let mut rate = NetOutput::default();
        for k in 0..h {
            let a = tanh(w1[2 * k] * t_norm + w1[2 * k + 1] * power + b1[k]);
            let slope = (1.0 - a * a) * w1[2 * k] * inv_t;
            value.delta += w2[k] * a;
            value.omega += w2[h + k] * a;
            rate.delta += w2[k] * slope;
            rate.omega += w2[h + k] * slope;
        }
        (value, rate)
    }

    /// Gradient with respect to Θ of a scalar `L = Σᵢ ℓᵢ(x̂ᵢ, dx̂ᵢ/dt)`.
    ///
    /// For every input point `adjoint(i, x̂ᵢ, dx̂ᵢ/dt)` must return the
    /// partials of `ℓᵢ`. The closure is called exactly once per point in
    /// order, so callers can accumulate their own loss value and any
    /// gradients with respect to non-network quantities inside it.
    pub fn grad_scalar<F>(
        &self,
        inputs: &[NetInput],
        duration: f64,
        mut adjoint: F,
    ) -> Result<NetParams>
    where
        F: FnMut(usize, &NetOutput, &NetOutput) -> Adjoint,
    {
        let h = self.hidden;
        let inv_t = 1.0 / duration;
        let mut grad = NetParams::zeros(h);
        let mut act = vec![0.0; h];
        let b2 = self.b2();
        let (w1, b1, w2) = (self.w1(), self.b1(), self.w2());

        for (i, input) in inputs.iter().enumerate() {
            let mut value = NetOutput::new(b2[0], b2[1]);
            let mut rate = NetOutput::default();
            for k in 0..h {
                let a = tanh(w1[2 * k] * input.t_norm + w1[2 * k + 1] * input.power + b1[k]);
                act[k] = a;
                let slope = (1.0 - a * a) * w1[2 * k] * inv_t;
                value.delta += w2[k] * a;
                value.omega += w2[h + k] * a;
                rate.delta += w2[k] * slope;
                rate.omega += w2[h + k] * slope;
            }
            let adj = adjoint(i, &value, &rate);
            if !(adj.value.is_finite() && adj.rate.is_finite() && value.is_finite()) {
                return Err(Error::GradientOverflow);
            }

            let (gw1, gb1, gw2, gb2) = grad.split_mut();
            gb2[0] += adj.value.delta;
            gb2[1] += adj.value.omega;
            for k in 0..h {
                let a = act[k];
                let g = 1.0 - a * a;
                let c = w1[2 * k];
                // Upstream sensitivities of the activation and of its slope term.
                let a_bar = adj.value.delta * w2[k] + adj.value.omega * w2[h + k];
                let q = (adj.rate.delta * w2[k] + adj.rate.omega * w2[h + k]) * inv_t;
                gw2[k] += adj.value.delta * a + adj.rate.delta * g * c * inv_t;
                gw2[h + k] += adj.value.omega * a + adj.rate.omega * g * c * inv_t;
                let z_bar = g * (a_bar - 2.0 * q * c * a);
                gw1[2 * k] += z_bar * input.t_norm + q * g;
                gw1[2 * k + 1] += z_bar * input.power;
                gb1[k] += z_bar;
            }
        }
        if !grad.is_finite() {
            return Err(Error::GradientOverflow);
        }
        Ok(grad)
    }

    pub fn to_json(&self) -> NetParamsJson {
        let h = self.hidden;
        let w1 = self.w1().chunks(2).map(|r| [r[0], r[1]]).collect();
        let w2 = self.w2().chunks(h).map(<[f64]>::to_vec).collect();
        NetParamsJson {
            hidden_size: h,
            w1,
            b1: self.b1().to_vec(),
            w2,
            b2: self.b2(),
        }
    }

    pub fn from_json(json: &NetParamsJson) -> Result<Self> {
        let h = json.hidden_size;
        if json.w1.len() != h || json.b1.len() != h || json.w2.len() != 2 {
            return Err(Error::InvalidConfig(format!(
                "network arrays do not match hidden_size {h}"
            )));
        }
        if json.w2.iter().any(|row| row.len() != h) {
            return Err(Error::InvalidConfig(format!("w2 rows must have {h} entries")));
        }
        let mut values = Vec::with_capacity(5 * h + 2);
        values.extend(json.w1.iter().flatten());
        values.extend(&json.b1);
        values.extend(json.w2.iter().flatten());
        values.extend(json.b2);
        Self::from_flat(h, values)
    }
}

/// JSON form of [`NetParams`]: named arrays, `w1` is hidden×2 and `w2` is 2×hidden.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetParamsJson {
    pub w1: Vec<[f64; 2]>,
    pub b1: Vec<f64>,
    pub w2: Vec<Vec<f64>>,
    pub b2: [f64; 2],
    pub hidden_size: usize,
}

impl Serialize for NetParams {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_json().serialize(s)
    }
}

impl<'de> Deserialize<'de> for NetParams {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let json = NetParamsJson::deserialize(d)?;
        NetParams::from_json(&json).map_err(serde::de::Error::custom)
    }
}
