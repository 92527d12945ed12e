//! Stochastic-interpolant policy bridging at desk scale.
//!
//! The crate transports samples from an arbitrary source policy to a
//! demonstrated target policy by integrating a learned forward SDE, and ships
//! the pieces needed to evaluate that claim end to end:
//!
//! - [`numeric`]: dense matrices, seeded RNG streams, MLPs with analytic
//!   backprop, Adam, sinusoidal time features and JSON checkpoints.
//! - [`interpolant`]: the Linear/Power3 interpolants with their γ and ε
//!   schedules.
//! - [`source`]: Gaussian, mixture, ring and CVAE source policies.
//! - [`bridge`]: training of the velocity, score and decomposed-velocity
//!   fields and the Euler–Maruyama sampler.
//! - [`baselines`]: DDPM training with DDIM sampling, and a residual policy.
//! - [`metrics`]: exact EMD, roughness, Lipschitz probes and moments.
//! - [`theory`]: finite-support checks of the source-improvement bounds.

pub mod baselines;
pub mod bridge;
pub mod data;
mod error;
pub mod interpolant;
pub mod metrics;
pub mod numeric;
pub mod source;
pub mod theory;
pub mod train;

pub use error::{Error, Result};
