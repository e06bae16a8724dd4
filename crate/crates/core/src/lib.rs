//! Simulation and analysis of exponential functionals of Lévy processes and
//! of integrals `∫ g(ξ_t) dY_t`.

pub mod catalogue;
pub mod criteria;
pub mod error;
pub mod exfun;
pub mod experiment;
pub mod levy;
pub mod path;
pub mod quad;
pub mod stats;

pub use error::{Error, Result};
