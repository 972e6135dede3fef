//! Simulation and verification laboratory for predictive distributions of
//! dependent random sequences.
//!
//! The crate is organised bottom-up:
//!
//! * [`measure`]: state spaces, finite-support measures, bounded test
//!   functions and the bounded Lipschitz distance.
//! * [`processes`]: the catalog of stochastic processes with seeded samplers
//!   and ground-truth flags.
//! * [`predictive`]: exact predictive distributions, either by closed form or
//!   by brute-force conditioning over latent configurations.
//! * [`diagnostics`]: Monte Carlo and exact deciders for the convergence
//!   conditions on predictive distributions.
//! * [`harness`]: scenario registry, configuration, execution and output files.

pub mod diagnostics;
pub mod error;
pub mod harness;
pub mod measure;
pub mod predictive;
pub mod processes;
pub mod quad;
pub mod seed;

pub use error::{Error, Result};
