//! Fusion of stochastic instance-segmentation passes into Bayesian
//! observations with epistemic/aleatoric uncertainty, plus probabilistic
//! evaluation (PMQ, ECE, Brier, AUSE) and a synthetic ensemble simulator.

pub mod assignment;
pub mod calibration;
pub mod clustering;
pub mod error;
pub mod eval;
pub mod fusion;
pub mod io;
pub mod mask;
pub mod model;
pub mod pipeline;
pub mod pmq;
pub mod sim;
pub mod uncertainty;

pub use error::{Error, Result};
