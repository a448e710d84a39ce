//! Green potentials of Brownian motion and the simple random walk, and their
//! Hadamard powers.
//!
//! The crate covers continuum kernels ([`continuum`]), lattice Green
//! functions ([`lattice`]), potential-matrix tests and Hadamard transforms
//! ([`potential`]), lattice discretizations of domains ([`domain`]), the
//! discretized Green operators ([`operator`]) and Monte Carlo estimators
//! ([`montecarlo`]). The `greenpot` binary drives experiments through
//! [`harness`].

pub mod continuum;
pub mod domain;
pub mod error;
pub mod harness;
pub mod lattice;
pub mod montecarlo;
pub mod numerics;
pub mod operator;
pub mod potential;

pub use error::{GreenError, Result};
