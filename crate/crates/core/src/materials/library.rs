//! Built-in materials and the `materials.json` manifest.
//!
//! Au and Ag are Drude + two-pole Lorentz fits to the Johnson & Christy (1972)
//! noble-metal constants embedded under `data/`. ITO is a single Drude term
//! fitted to an embedded reference table that was itself tabulated from a
//! typical sputtered-ITO Drude parametrisation. SiO₂ is a constant n = 1.45.
//! The oxide constants are documented defaults, not measured ground truth;
//! swap them by editing a manifest.

use std::path::Path;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{fit_drude_lorentz, FitOptions, FitReport, MaterialModel, OpticsTable};
use crate::error::{Error, Result};

pub const MANIFEST_VERSION: u32 = 1;
pub const SIO2_INDEX: f64 = 1.45;

/// Band over which the built-in metals are fitted.
const METAL_FIT_BAND_NM: [f64; 2] = [280.0, 1700.0];
const METAL_LORENTZ_POLES: usize = 2;
const ITO_FIT_BAND_NM: [f64; 2] = [300.0, 2000.0];

const AU_CSV: &str = include_str!("../../data/au_johnson_christy.csv");
const AG_CSV: &str = include_str!("../../data/ag_johnson_christy.csv");
const ITO_CSV: &str = include_str!("../../data/ito.csv");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Metal {
    Au,
    Ag,
}

impl Metal {
    pub const ALL: [Metal; 2] = [Metal::Au, Metal::Ag];

    pub fn symbol(self) -> &'static str {
        match self {
            Metal::Au => "Au",
            Metal::Ag => "Ag",
        }
    }

    /// Lower-case key used in the manifest and file names.
    pub fn key(self) -> &'static str {
        match self {
            Metal::Au => "au",
            Metal::Ag => "ag",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "au" | "gold" => Ok(Metal::Au),
            "ag" | "silver" => Ok(Metal::Ag),
            _ => Err(Error::Encoding(s.to_string())),
        }
    }

    pub fn model(self) -> MaterialModel {
        builtin(self.key()).expect("built-in metals always resolve")
    }
}

impl std::fmt::Display for Metal {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.symbol())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub name: String,
    pub model: MaterialModel,
    pub source: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit_band_nm: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit_lorentz_poles: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit_rms_nk_residual: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    pub materials: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn builtin() -> &'static Manifest {
        static MANIFEST: OnceLock<Manifest> = OnceLock::new();
        MANIFEST.get_or_init(build_builtin_manifest)
    }

    pub fn get(&self, name: &str) -> Option<&MaterialModel> {
        let name = name.to_ascii_lowercase();
        self.materials
            .iter()
            .find(|e| e.name == name)
            .map(|e| &e.model)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: Manifest = serde_json::from_str(text)?;
        if m.version != MANIFEST_VERSION {
            return Err(Error::InvalidArgument(format!(
                "unsupported materials manifest version {} (expected {MANIFEST_VERSION})",
                m.version
            )));
        }
        for e in &m.materials {
            e.model.validate()?;
        }
        Ok(m)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    /// Hex SHA-256 of the serialized manifest.
    pub fn content_hash(&self) -> String {
        let digest = Sha256::digest(self.to_json().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

pub fn builtin_table(name: &str) -> Option<OpticsTable> {
    let csv = match name.to_ascii_lowercase().as_str() {
        "au" => AU_CSV,
        "ag" => AG_CSV,
        "ito" => ITO_CSV,
        _ => return None,
    };
    Some(OpticsTable::parse_csv(csv, Path::new(name)).expect("embedded tables are valid"))
}

fn fit_reports() -> &'static [(String, FitReport)] {
    static REPORTS: OnceLock<Vec<(String, FitReport)>> = OnceLock::new();
    REPORTS.get_or_init(|| {
        let opts = FitOptions::default();
        let fit = |name: &str, poles: usize, band: [f64; 2]| {
            let table = builtin_table(name).expect("embedded table");
            let report = fit_drude_lorentz(&table, poles, band, &opts)
                .unwrap_or_else(|e| panic!("built-in fit for {name} failed: {e}"));
            (name.to_string(), report)
        };
        vec![
            fit("au", METAL_LORENTZ_POLES, METAL_FIT_BAND_NM),
            fit("ag", METAL_LORENTZ_POLES, METAL_FIT_BAND_NM),
            fit("ito", 0, ITO_FIT_BAND_NM),
        ]
    })
}

pub fn builtin_fit_report(name: &str) -> Option<&'static FitReport> {
    let name = name.to_ascii_lowercase();
    fit_reports()
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, r)| r)
}

fn build_builtin_manifest() -> Manifest {
    let mut materials = vec![
        ManifestEntry {
            name: "air".into(),
            model: MaterialModel::vacuum(),
            source: "vacuum".into(),
            fit_band_nm: None,
            fit_lorentz_poles: None,
            fit_rms_nk_residual: None,
        },
        ManifestEntry {
            name: "sio2".into(),
            model: MaterialModel::constant(SIO2_INDEX),
            source: "constant index default".into(),
            fit_band_nm: None,
            fit_lorentz_poles: None,
            fit_rms_nk_residual: None,
        },
    ];
    let sources = [
        ("au", "Johnson & Christy 1972, Drude + 2 Lorentz fit"),
        ("ag", "Johnson & Christy 1972, Drude + 2 Lorentz fit"),
        ("ito", "reference ITO table, single Drude fit"),
    ];
    for (name, source) in sources {
        let report = builtin_fit_report(name).expect("fitted");
        materials.push(ManifestEntry {
            name: name.into(),
            model: MaterialModel::DrudeLorentz(report.model.clone()),
            source: source.into(),
            fit_band_nm: Some(report.band_nm),
            fit_lorentz_poles: Some(report.model.lorentz_poles.len()),
            fit_rms_nk_residual: Some(report.rms_nk_residual),
        });
    }
    Manifest {
        version: MANIFEST_VERSION,
        materials,
    }
}

/// Built-in material by name: `air`, `sio2`, `ito`, `au`, `ag`.
pub fn builtin(name: &str) -> Result<MaterialModel> {
    Manifest::builtin()
        .get(name)
        .cloned()
        .ok_or_else(|| Error::InvalidArgument(format!("unknown built-in material '{name}'")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::materials::{permittivity, refractive_index};

    #[test]
    fn metal_parse_and_display() {
        assert_eq!(Metal::parse("au").unwrap(), Metal::Au);
        assert_eq!(Metal::parse("Ag").unwrap(), Metal::Ag);
        assert!(matches!(Metal::parse("cu"), Err(Error::Encoding(_))));
        assert_eq!(Metal::Au.to_string(), "Au");
    }

    #[test]
    fn manifest_round_trip_preserves_hash() {
        let m = Manifest::builtin();
        let back = Manifest::from_json(&m.to_json()).unwrap();
        assert_eq!(&back, m);
        assert_eq!(back.content_hash(), m.content_hash());
    }

    #[test]
    fn builtin_models_are_passive_over_visible_and_nir() {
        for name in ["air", "sio2", "ito", "au", "ag"] {
            let model = builtin(name).unwrap();
            let mut w = 200.0;
            while w <= 2000.0 {
                let eps = permittivity(&model, w).unwrap();
                assert!(eps.im >= 0.0, "{name} at {w} nm: {eps}");
                w += 5.0;
            }
        }
    }

    #[test]
    fn builtin_fits_meet_threshold() {
        for name in ["au", "ag", "ito"] {
            let r = builtin_fit_report(name).unwrap();
            assert!(r.rms_nk_residual <= 0.25, "{name}: {}", r.rms_nk_residual);
        }
    }

    #[test]
    fn gold_is_free_electron_like_in_red_and_nir() {
        let au = Metal::Au.model();
        let mut w = 600.0;
        while w <= 1500.0 {
            assert!(permittivity(&au, w).unwrap().re < 0.0, "{w}");
            w += 10.0;
        }
        let eps = permittivity(&au, 600.0).unwrap();
        assert!(eps.re < 0.0 && eps.im > 0.0);
        let (_, k) = refractive_index(eps).unwrap();
        let (_, k_tab) = builtin_table("au").unwrap().interpolate(600.0).unwrap();
        let rms = builtin_fit_report("au").unwrap().rms_nk_residual;
        assert!(
            (k - k_tab).abs() <= 2.0 * rms.max(0.05),
            "k={k} table={k_tab}"
        );
    }

    #[test]
    fn gold_visible_band_two_pole_fit() {
        let table = builtin_table("au").unwrap();
        let report = fit_drude_lorentz(&table, 2, [400.0, 1000.0], &FitOptions::default()).unwrap();
        assert!(report.rms_nk_residual <= crate::materials::DEFAULT_FIT_THRESHOLD);
        let model = MaterialModel::DrudeLorentz(report.model);
        let (_, k) = refractive_index(permittivity(&model, 600.0).unwrap()).unwrap();
        let (_, k_tab) = table.interpolate(600.0).unwrap();
        assert!((2.5..=3.5).contains(&k), "k = {k}");
        assert!((2.5..=3.5).contains(&k_tab), "table k = {k_tab}");
    }

    #[test]
    fn gold_plasma_energy_near_nine_ev() {
        let MaterialModel::DrudeLorentz(m) = Metal::Au.model() else {
            panic!("au is drude-lorentz")
        };
        assert!((8.0..=10.0).contains(&m.drude_plasma_energy_ev), "{m:?}");
    }
}
