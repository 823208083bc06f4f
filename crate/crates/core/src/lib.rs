//! Trotter, Strang, Suzuki, time-dependent Trotter and quantum Zeno product
//! formulas on truncated bosonic Fock spaces, with exact and reference
//! propagators to measure their convergence.

pub mod catalog;
pub mod config;
pub mod error;
pub mod fock;
pub mod linalg;
pub mod liouville;

pub mod metrics;
pub mod models;
pub mod propagators;
pub mod runner;
pub mod schemes;

pub use error::{Error, Result};
