//! Plasmonic multilayer absorption toolkit: dispersive materials, an analytic
//! transfer-matrix solver, a 2D dispersive FDTD engine, sweep and
//! preprocessing harness, neural surrogates and exact Shapley attribution.

pub mod attribution;
pub mod dataset;
pub mod error;
pub mod fdtd;
pub mod format;
pub mod materials;
pub mod surrogate;
pub mod tmm;
pub mod units;

pub use error::{Error, Result};
