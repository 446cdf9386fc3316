//! Inertia and damping identification for a single machine on an infinite bus.
//!
//! [`dynamics`] simulates the swing equation and its noisy measurements;
//! [`sindy`], [`pinn`] and [`bpinn`] estimate `(m, d)` from a trajectory;
//! [`harness`] runs the noise and length sweeps and writes reports.

pub mod bpinn;
pub mod dynamics;
pub mod error;
pub mod harness;
pub mod net;
pub mod optim;
pub mod pinn;
pub mod sindy;

pub use error::{Error, Result};
