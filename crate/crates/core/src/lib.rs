//! Random walks in i.i.d. random environments among soft obstacles.
//!
//! The crate computes the theoretical survival-tail exponents of the walk
//! (annealed, quenched and the two mixed measures), evaluates quenched
//! survival curves exactly by dynamic programming, samples trajectories by
//! Monte Carlo, and fits empirical exponents against theory.

pub mod curve;
pub mod envmodel;
pub mod error;
pub mod experiment;
pub mod exponents;
pub mod fit;
pub mod montecarlo;
pub mod oracle;
mod optimize;
pub mod potential;
pub mod rng;

pub use error::{Error, Result};
