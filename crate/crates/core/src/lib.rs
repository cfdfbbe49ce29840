//! Physics-informed Gaussian-process forecasting for a wind-driven generator
//! on an infinite bus.
//!
//! The prior mean and covariance of the rotor angle, rotor speed and wind
//! power fluctuation are estimated from Monte Carlo ensembles of the
//! stochastic swing equation ([`sde`], [`ensemble`]) and conditioned on
//! partial observations ([`gpr`]). [`scenarios`] runs the forecasting and
//! reconstruction case studies and the comparison against a kernel-based
//! data-driven baseline.

pub mod cli;
pub mod ensemble;
pub mod error;
pub mod gpr;
pub mod rng;
pub mod scenarios;
pub mod sde;

use serde::{Deserialize, Serialize};

pub use error::{Error, Result};

/// State variable, in storage order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variable {
    Theta,
    Omega,
    PmPrime,
}

impl Variable {
    pub const ALL: [Variable; 3] = [Variable::Theta, Variable::Omega, Variable::PmPrime];

    pub fn index(self) -> usize {
        match self {
            Variable::Theta => 0,
            Variable::Omega => 1,
            Variable::PmPrime => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Variable::Theta => "theta",
            Variable::Omega => "omega",
            Variable::PmPrime => "pm_prime",
        }
    }
}

impl std::fmt::Display for Variable {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}
