//! Refracted skew Brownian motion: exit problems, resolvents, transition
//! densities, quasi-random sampling and tail risk.
//!
//! Every public evaluation takes coordinates in the caller's frame and shifts
//! them by the skew level before touching any formula, so the internals always
//! see the skew point at the origin.

pub mod density;
pub mod error;
pub mod exit;
pub mod model;
pub mod potential;
pub mod quadrature;
pub mod risk;
pub mod sampler;
pub mod special;
pub mod stats;

pub use error::{Error, Result};
pub use model::{ModelParams, Preset};
pub use quadrature::QuadConfig;
