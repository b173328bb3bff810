//! Program units.
//!
//! Lengths are in micrometres and the speed of light is 1, so time is
//! measured in μm/c and angular frequency in rad·c/μm. Vacuum permittivity,
//! permeability and impedance are all 1. Public APIs take nm and eV and go
//! through the conversions here.

use std::f64::consts::PI;

/// ħc in eV·μm.
pub const HBAR_C_EV_UM: f64 = 0.197_326_980_4;

/// Impedance of free space in ohms.
pub const ETA0_OHM: f64 = 376.730_313_668;

pub const NM_PER_UM: f64 = 1000.0;

/// Angular frequency (program units) of a photon with energy `ev`.
pub fn ev_to_omega(ev: f64) -> f64 {
    ev / HBAR_C_EV_UM
}

pub fn omega_to_ev(omega: f64) -> f64 {
    omega * HBAR_C_EV_UM
}

/// Angular frequency (program units) of vacuum wavelength `nm`.
pub fn wavelength_nm_to_omega(nm: f64) -> f64 {
    2.0 * PI * NM_PER_UM / nm
}

pub fn omega_to_wavelength_nm(omega: f64) -> f64 {
    2.0 * PI * NM_PER_UM / omega
}

pub fn wavelength_nm_to_ev(nm: f64) -> f64 {
    omega_to_ev(wavelength_nm_to_omega(nm))
}

/// Converts a conductivity in S/m to program units (σ·a/(ε₀c) with a = 1 μm).
pub fn conductivity_si_to_program(sigma_s_per_m: f64) -> f64 {
    sigma_s_per_m * ETA0_OHM * 1e-6
}
