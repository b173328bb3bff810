use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Resolution/band preset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    /// 50 cells/μm, 400–1200 nm band.
    Desk,
    /// 150 cells/μm, 300–1500 nm band.
    Full,
}

impl Profile {
    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "desk" => Ok(Profile::Desk),
            "full" => Ok(Profile::Full),
            _ => Err(Error::InvalidArgument(format!(
                "unknown profile '{s}' (expected desk|full)"
            ))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Profile::Desk => "desk",
            Profile::Full => "full",
        }
    }

    pub fn resolution(self) -> f64 {
        match self {
            Profile::Desk => 50.0,
            Profile::Full => 150.0,
        }
    }

    pub fn band_nm(self) -> [f64; 2] {
        match self {
            Profile::Desk => [400.0, 1200.0],
            Profile::Full => [300.0, 1500.0],
        }
    }

    /// `count` wavelengths evenly spaced over the profile band.
    pub fn wavelengths(self, count: usize) -> Vec<f64> {
        let [lo, hi] = self.band_nm();
        linspace(lo, hi, count)
    }

    pub fn config(self, monitor_wavelengths_nm: Vec<f64>) -> SimConfig {
        SimConfig {
            resolution: self.resolution(),
            source_band_nm: self.band_nm(),
            monitor_wavelengths_nm,
            ..SimConfig::default()
        }
    }
}

pub fn linspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..count)
            .map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64)
            .collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Domain size in μm: [propagation axis, transverse axis].
    pub cell_size_um: [f64; 2],
    /// Cells per μm.
    pub resolution: f64,
    pub pml_thickness_um: f64,
    pub courant: f64,
    pub source_band_nm: [f64; 2],
    pub monitor_wavelengths_nm: Vec<f64>,
    pub decay_threshold: f64,
    pub max_steps: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            cell_size_um: [4.0, 2.75],
            resolution: Profile::Desk.resolution(),
            pml_thickness_um: 1.0,
            courant: 0.5,
            source_band_nm: Profile::Desk.band_nm(),
            monitor_wavelengths_nm: Vec::new(),
            decay_threshold: 1e-6,
            max_steps: 200_000,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let err = |m: String| Err(Error::InvalidArgument(m));
        if !(self.resolution > 0.0) {
            return err(format!("resolution must be > 0, got {}", self.resolution));
        }
        if !(self.courant > 0.0 && self.courant <= std::f64::consts::FRAC_1_SQRT_2) {
            return err(format!(
                "courant number must lie in (0, 1/sqrt(2)], got {}",
                self.courant
            ));
        }
        let min_side = self.cell_size_um[0].min(self.cell_size_um[1]);
        if !(min_side > 0.0) {
            return err(format!(
                "cell size must be positive, got {:?}",
                self.cell_size_um
            ));
        }
        if !(self.pml_thickness_um >= 0.0 && self.pml_thickness_um < min_side / 2.0) {
            return err(format!(
                "pml thickness {} μm must be below half the smallest cell side ({} μm)",
                self.pml_thickness_um,
                min_side / 2.0
            ));
        }
        let [lo, hi] = self.source_band_nm;
        if !(lo > 0.0 && lo < hi) {
            return err(format!(
                "source band {:?} nm must be positive and increasing",
                self.source_band_nm
            ));
        }
        if let Some(w) = self.monitor_wavelengths_nm.iter().find(|w| !(**w > 0.0)) {
            return err(format!("monitor wavelength must be positive, got {w}"));
        }
        if !(self.decay_threshold > 0.0 && self.decay_threshold < 1.0) {
            return err(format!(
                "decay threshold must lie in (0, 1), got {}",
                self.decay_threshold
            ));
        }
        if self.max_steps == 0 {
            return err("max_steps must be > 0".into());
        }
        Ok(())
    }

    /// Cell counts along [propagation, transverse]: ceil(size × resolution).
    pub fn grid_shape(&self) -> [usize; 2] {
        // tolerate representation error so that e.g. 4.0 × 150 stays 600
        let count = |size: f64| {
            let raw = size * self.resolution;
            let rounded = raw.round();
            if (raw - rounded).abs() < 1e-9 * raw.max(1.0) {
                rounded as usize
            } else {
                raw.ceil() as usize
            }
        };
        [count(self.cell_size_um[0]), count(self.cell_size_um[1])]
    }

    pub fn dx_um(&self) -> f64 {
        1.0 / self.resolution
    }

    pub fn dt(&self) -> f64 {
        self.courant * self.dx_um()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_grid_shape_rounds_up() {
        let cfg = Profile::Full.config(vec![600.0]);
        assert_eq!(cfg.grid_shape(), [600, 413]);
        assert_eq!(Profile::Desk.config(vec![]).grid_shape(), [200, 138]);
    }

    #[test]
    fn validation() {
        let mut cfg = SimConfig::default();
        assert!(cfg.validate().is_ok());
        cfg.courant = 0.75;
        assert!(cfg.validate().is_err());
        let mut cfg = SimConfig::default();
        cfg.pml_thickness_um = 1.5;
        assert!(cfg.validate().is_err());
        let mut cfg = SimConfig::default();
        cfg.resolution = 0.0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn linspace_endpoints() {
        let w = linspace(300.0, 1500.0, 25);
        assert_eq!(w.len(), 25);
        assert_eq!(w[0], 300.0);
        assert_eq!(w[24], 1500.0);
        assert_eq!(w[1], 350.0);
    }
}
