//! Dispersive permittivity models and the layered-stack geometry types.
//!
//! Time convention is exp(−iωt) everywhere: a passive medium has Im ε ≥ 0.

mod fit;
mod library;
mod stack;
mod table;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units;

pub use fit::{fit_drude_lorentz, tabulate, FitOptions, FitReport, DEFAULT_FIT_THRESHOLD};
pub use library::{
    builtin, builtin_fit_report, builtin_table, Manifest, ManifestEntry, Metal, MANIFEST_VERSION,
    SIO2_INDEX,
};
pub use stack::{Layer, StackSpec, ITO_THICKNESS_NM, SIO2_THICKNESS_NM};
pub use table::{OpticsRow, OpticsTable};

/// Bound-electron oscillator Δε·ω₀²/(ω₀² − ω² − iγω).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LorentzPole {
    pub strength: f64,
    pub resonance_energy_ev: f64,
    pub damping_energy_ev: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrudeLorentzModel {
    pub eps_inf: f64,
    pub drude_plasma_energy_ev: f64,
    pub drude_damping_energy_ev: f64,
    /// DC conductivity in S/m.
    #[serde(default)]
    pub static_conductivity: f64,
    #[serde(default)]
    pub lorentz_poles: Vec<LorentzPole>,
}

impl DrudeLorentzModel {
    pub fn drude(eps_inf: f64, plasma_ev: f64, damping_ev: f64) -> Self {
        Self {
            eps_inf,
            drude_plasma_energy_ev: plasma_ev,
            drude_damping_energy_ev: damping_ev,
            static_conductivity: 0.0,
            lorentz_poles: Vec::new(),
        }
    }

    /// Checks that every term is passive.
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str, v: f64| Err(Error::InvalidArgument(format!("{what} = {v}")));
        if !(self.eps_inf >= 1.0) {
            return bad("eps_inf must be >= 1, got", self.eps_inf);
        }
        if !(self.drude_plasma_energy_ev >= 0.0) {
            return bad(
                "drude plasma energy must be >= 0, got",
                self.drude_plasma_energy_ev,
            );
        }
        if !(self.drude_damping_energy_ev > 0.0) {
            return bad(
                "drude damping must be > 0, got",
                self.drude_damping_energy_ev,
            );
        }
        if !(self.static_conductivity >= 0.0) {
            return bad(
                "static conductivity must be >= 0, got",
                self.static_conductivity,
            );
        }
        for p in &self.lorentz_poles {
            if !(p.strength >= 0.0) {
                return bad("lorentz strength must be >= 0, got", p.strength);
            }
            if !(p.resonance_energy_ev > 0.0) {
                return bad(
                    "lorentz resonance energy must be > 0, got",
                    p.resonance_energy_ev,
                );
            }
            if !(p.damping_energy_ev > 0.0) {
                return bad("lorentz damping must be > 0, got", p.damping_energy_ev);
            }
        }
        Ok(())
    }

    /// ε(ω) with ω in program units.
    pub fn permittivity_at_omega(&self, omega: f64) -> Complex64 {
        let i = Complex64::i();
        let wp = units::ev_to_omega(self.drude_plasma_energy_ev);
        let gamma = units::ev_to_omega(self.drude_damping_energy_ev);
        let mut eps = Complex64::new(self.eps_inf, 0.0);
        if wp > 0.0 {
            eps -= wp * wp / (omega * (omega + i * gamma));
        }
        for p in &self.lorentz_poles {
            let w0 = units::ev_to_omega(p.resonance_energy_ev);
            let gl = units::ev_to_omega(p.damping_energy_ev);
            eps += p.strength * w0 * w0 / (w0 * w0 - omega * omega - i * gl * omega);
        }
        if self.static_conductivity > 0.0 {
            eps += i * units::conductivity_si_to_program(self.static_conductivity) / omega;
        }
        eps
    }
}

/// Lossless medium with real index n ≥ 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstantIndexModel {
    pub refractive_index: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MaterialModel {
    DrudeLorentz(DrudeLorentzModel),
    ConstantIndex(ConstantIndexModel),
}

impl MaterialModel {
    pub fn constant(n: f64) -> Self {
        MaterialModel::ConstantIndex(ConstantIndexModel {
            refractive_index: n,
        })
    }

    pub fn vacuum() -> Self {
        Self::constant(1.0)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            MaterialModel::DrudeLorentz(m) => m.validate(),
            MaterialModel::ConstantIndex(c) if c.refractive_index >= 1.0 => Ok(()),
            MaterialModel::ConstantIndex(c) => Err(Error::InvalidArgument(format!(
                "refractive index must be >= 1, got {}",
                c.refractive_index
            ))),
        }
    }

    /// True if ε″ > 0 somewhere (any conduction or oscillator term).
    pub fn is_lossy(&self) -> bool {
        match self {
            MaterialModel::ConstantIndex(_) => false,
            MaterialModel::DrudeLorentz(m) => {
                m.drude_plasma_energy_ev > 0.0
                    || m.static_conductivity > 0.0
                    || m.lorentz_poles.iter().any(|p| p.strength > 0.0)
            }
        }
    }

    /// High-frequency permittivity.
    pub fn eps_inf(&self) -> f64 {
        match self {
            MaterialModel::DrudeLorentz(m) => m.eps_inf,
            MaterialModel::ConstantIndex(c) => c.refractive_index * c.refractive_index,
        }
    }

    pub fn permittivity_at_omega(&self, omega: f64) -> Complex64 {
        match self {
            MaterialModel::DrudeLorentz(m) => m.permittivity_at_omega(omega),
            MaterialModel::ConstantIndex(c) => {
                Complex64::new(c.refractive_index * c.refractive_index, 0.0)
            }
        }
    }
}

/// Complex permittivity at vacuum wavelength `wavelength_nm`.
pub fn permittivity(model: &MaterialModel, wavelength_nm: f64) -> Result<Complex64> {
    if !(wavelength_nm > 0.0) || !wavelength_nm.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "wavelength must be positive, got {wavelength_nm}"
        )));
    }
    Ok(model.permittivity_at_omega(units::wavelength_nm_to_omega(wavelength_nm)))
}

/// Complex refractive index n + ik with (n + ik)² = ε on the k ≥ 0 branch.
pub fn refractive_index(eps: Complex64) -> Result<(f64, f64)> {
    if eps.im < 0.0 {
        return Err(Error::PassivityViolation { imag: eps.im });
    }
    let s = eps.sqrt();
    // principal root already has re >= 0; with im(eps) >= 0 it also has im >= 0
    Ok((s.re, s.im))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn drude_zero_crossing_at_plasma_energy() {
        let m = MaterialModel::DrudeLorentz(DrudeLorentzModel::drude(1.0, 1.0, 1e-12));
        let eps = m.permittivity_at_omega(units::ev_to_omega(1.0));
        assert!(eps.re.abs() < 1e-9, "{eps}");
    }

    #[test]
    fn high_frequency_limit() {
        let mut m = DrudeLorentzModel::drude(4.0, 9.0, 0.07);
        m.lorentz_poles.push(LorentzPole {
            strength: 1.5,
            resonance_energy_ev: 3.0,
            damping_energy_ev: 0.8,
        });
        let eps = permittivity(&MaterialModel::DrudeLorentz(m), 1.0).unwrap();
        assert!((eps - Complex64::new(4.0, 0.0)).norm() < 1e-2, "{eps}");
    }

    #[test]
    fn constant_index_is_n_squared() {
        let eps = permittivity(&MaterialModel::constant(1.45), 633.0).unwrap();
        assert_eq!(eps, Complex64::new(1.45 * 1.45, 0.0));
    }

    #[test]
    fn non_positive_wavelength_rejected() {
        assert!(matches!(
            permittivity(&MaterialModel::vacuum(), 0.0),
            Err(Error::InvalidArgument(_))
        ));
        assert!(permittivity(&MaterialModel::vacuum(), -3.0).is_err());
    }

    #[test]
    fn refractive_index_of_vacuum_and_metal_like() {
        assert_eq!(
            refractive_index(Complex64::new(1.0, 0.0)).unwrap(),
            (1.0, 0.0)
        );
        // polar form: |eps| = sqrt(1 + 1e-4), arg = pi - atan(0.01)
        let (n, k) = refractive_index(Complex64::new(-1.0, 0.01)).unwrap();
        let r = (1.0f64 + 1e-4).sqrt().sqrt();
        let half_arg = 0.5 * (std::f64::consts::PI - 0.01f64.atan());
        assert!((n - r * half_arg.cos()).abs() < 1e-15);
        assert!((k - r * half_arg.sin()).abs() < 1e-15);
        assert!((n - 0.0050).abs() < 5e-5 && (k - 1.0000).abs() < 5e-5);
    }

    #[test]
    fn refractive_index_rejects_gain() {
        assert!(matches!(
            refractive_index(Complex64::new(2.0, -0.1)),
            Err(Error::PassivityViolation { .. })
        ));
    }

    #[test]
    fn validate_catches_active_terms() {
        let mut m = DrudeLorentzModel::drude(1.0, 9.0, 0.1);
        assert!(m.validate().is_ok());
        m.eps_inf = 0.5;
        assert!(m.validate().is_err());
        let mut m = DrudeLorentzModel::drude(1.0, 9.0, 0.1);
        m.lorentz_poles.push(LorentzPole {
            strength: -1.0,
            resonance_energy_ev: 3.0,
            damping_energy_ev: 0.1,
        });
        assert!(m.validate().is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn square_round_trip(re in -100.0f64..100.0, im in 0.0f64..100.0) {
                let eps = Complex64::new(re, im);
                let (n, k) = refractive_index(eps).unwrap();
                prop_assert!(n >= 0.0 && k >= 0.0);
                let back = Complex64::new(n, k) * Complex64::new(n, k);
                prop_assert!((back - eps).norm() <= 1e-12 * eps.norm().max(1e-300));
            }

            #[test]
            fn random_passive_models_stay_passive(
                eps_inf in 1.0f64..10.0,
                wp in 0.0f64..12.0,
                g in 0.01f64..1.0,
                s in 0.0f64..5.0,
                w0 in 1.0f64..6.0,
                gl in 0.05f64..2.0,
                lambda in 200.0f64..2000.0,
            ) {
                let mut m = DrudeLorentzModel::drude(eps_inf, wp, g);
                m.lorentz_poles.push(LorentzPole { strength: s, resonance_energy_ev: w0, damping_energy_ev: gl });
                let eps = permittivity(&MaterialModel::DrudeLorentz(m), lambda).unwrap();
                prop_assert!(eps.im >= 0.0);
            }
        }
    }
}
