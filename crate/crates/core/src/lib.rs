//! Simulation and analysis engine for an (N+1)-link nonholonomic wheeled
//! vehicle: a Chaplygin sleigh towing N platforms, each with its own wheel
//! pair, optionally driven by a rotor with periodic angular momentum.

pub mod analysis;
pub mod dynamics;
pub mod error;
pub mod integrator;
pub mod model;

pub use error::{Error, Result};
