//! Two-dimensional dispersive FDTD solver for planar stacks at normal
//! incidence, with running-DFT monitors for spectra, absorbed-power maps and
//! flux-box absorption.

mod config;
mod engine;
pub mod geometry;
mod run;

pub use config::{linspace, Profile, SimConfig};
pub use engine::{FieldState, GaussianPulse, Simulation};
pub use geometry::Layout;
pub use run::{
    incident_flux, AbsorptionMap, FluxBox, RunMetadata, SpectralPoint, SpectralResult,
    DECAY_CHECK_INTERVAL, ORIENTATION_NOTE,
};

use crate::error::Result;
use crate::materials::StackSpec;

/// Rasterizes `stack` onto the grid described by `config`.
pub fn build_simulation(stack: &StackSpec, config: &SimConfig) -> Result<Simulation> {
    Simulation::build(stack, config)
}
