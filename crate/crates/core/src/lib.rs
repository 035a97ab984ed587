//! Boolean-function statistics of random deep networks and random Boolean circuits.
//!
//! The crate is organised bottom-up:
//!
//! * [`logic`]: input patterns, Boolean functions as packed truth tables, gates.
//! * [`gaussian`]: covariance factorization, sampling, orthant probabilities,
//!   quadrature oracles and the anti-diagonal matrix family.
//! * [`meanfield`]: kernel maps, overlap recursions (layer-dependent and
//!   cross-layer), fixed points.
//! * [`function_space`]: distributions over Boolean functions, entropy and
//!   divergences, Gaussian-field to function-distribution mapping.
//! * [`circuit`]: exact and sampled distributional recursion for random circuits.
//! * [`simulator`]: finite-width Monte Carlo of actual random machines.
//! * [`schema`]: column names shared with downstream plotting scripts.

pub mod circuit;
pub mod error;
pub mod function_space;
pub mod gaussian;
pub mod logic;
pub mod meanfield;
pub mod rng;
pub mod schema;
pub mod simulator;

pub use error::{Error, Result};
