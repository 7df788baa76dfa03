//! Stochastic characteristics for the transport equation
//! `du + b·∇u dt + ∇u ∘ dB_t = 0` with a divergence-free, Hölder drift.
//!
//! The solution is represented as `u(t, x) = u₀(Y_{0,t}(x))`, where `Y` is the
//! backward stochastic flow of `dX = b(X) dt + dB`. Flows are integrated with
//! Euler–Maruyama on seed-addressed, refinable Brownian paths so that
//! different drifts, mollification levels and step sizes can be compared on
//! the same noise realization.

pub mod brownian;
pub mod error;
pub mod field;
pub mod flow;
pub mod linalg;
pub mod quadrature;
pub mod stats;
pub mod transport;
pub mod weakform;

pub use error::{Error, Result};

/// Largest supported spatial dimension.
pub const MAX_DIM: usize = 3;

/// Crate version, echoed in experiment reports.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
