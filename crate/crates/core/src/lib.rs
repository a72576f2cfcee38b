//! Simulation and numerical verification toolkit for supercritical super
//! Ornstein–Uhlenbeck processes with `(1+β)`-stable branching.

pub mod branching;
pub mod config;
pub mod error;
pub mod ou_spectral;
pub mod output;
pub mod quadrature;
pub mod simulator;
pub mod stable_limits;
pub mod stats;
pub mod suites;

pub use error::{Error, Result};
