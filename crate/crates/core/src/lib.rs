//! Certified numerics for the Arnold circle map with additive uniform noise.
//!
//! The crate computes rigorous enclosures of stationary densities, mixing
//! rates, rotation numbers and their derivative with respect to the forcing
//! parameter, using an Ulam discretization of the annealed transfer operator
//! and interval arithmetic. A Monte Carlo module provides non-rigorous
//! estimates for comparison.

pub mod error;
pub mod dynamics;
pub mod rigor;
pub mod ulam;
pub mod certify;
pub mod response;
pub mod montecarlo;
pub mod cli;

pub use error::{Error, Result};
pub use rigor::IVal;
