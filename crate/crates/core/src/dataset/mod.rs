//! Parameter sweeps over metal and thickness, the records they produce and
//! the preprocessing applied before training.

mod preprocess;
mod sweep;

pub use preprocess::{
    impute_local_average, one_hot, split, standardize, ScalerParams, ONE_HOT_ORDER,
};
pub use sweep::{
    map_file_name, read_manifest, records_path, run_case, run_sweep, run_sweep_with, CaseOutput,
    CaseSummary, Engine, SweepManifest, SweepPlan, MANIFEST_FILE, MAPS_DIR, RECORDS_FILE,
};

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::format::sci9;
use crate::materials::Metal;

pub const RECORDS_HEADER: &str =
    "material,thickness_nm,wavelength_nm,absorbed_power,absorbed_flux,map_path,valid,imputed";

/// One (material, thickness, wavelength) sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub material: Metal,
    pub thickness_nm: f64,
    pub wavelength_nm: f64,
    pub absorbed_power: f64,
    pub absorbed_flux: f64,
    /// Map file relative to the sweep directory.
    pub map_path: Option<String>,
    pub valid: bool,
    #[serde(default)]
    pub imputed: bool,
}

impl SampleRecord {
    /// Record for a wavelength whose case failed.
    pub fn invalid(material: Metal, thickness_nm: f64, wavelength_nm: f64) -> Self {
        Self {
            material,
            thickness_nm,
            wavelength_nm,
            absorbed_power: f64::NAN,
            absorbed_flux: f64::NAN,
            map_path: None,
            valid: false,
            imputed: false,
        }
    }

    /// Valid and with finite targets.
    pub fn is_valid(&self) -> bool {
        self.valid && self.absorbed_power.is_finite() && self.absorbed_flux.is_finite()
    }

    /// Usable as a training sample: measured or filled in.
    pub fn has_targets(&self) -> bool {
        self.is_valid()
            || (self.imputed && self.absorbed_power.is_finite() && self.absorbed_flux.is_finite())
    }
}

/// Serializes records with a header row and `%.9e` numerics.
pub fn records_csv(records: &[SampleRecord]) -> String {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(Vec::new());
    w.write_record(RECORDS_HEADER.split(','))
        .expect("in-memory write");
    for r in records {
        w.write_record([
            r.material.symbol().to_string(),
            sci9(r.thickness_nm),
            sci9(r.wavelength_nm),
            sci9(r.absorbed_power),
            sci9(r.absorbed_flux),
            r.map_path.clone().unwrap_or_default(),
            r.valid.to_string(),
            r.imputed.to_string(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ascii output")
}

pub fn write_records(path: &Path, records: &[SampleRecord]) -> Result<()> {
    std::fs::write(path, records_csv(records)).map_err(|e| Error::io(path, e))
}

/// Reads a records file written by [`write_records`].
pub fn read_records(path: &Path) -> Result<Vec<SampleRecord>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_records(&text, path)
}

pub fn parse_records(text: &str, origin: &Path) -> Result<Vec<SampleRecord>> {
    let parse_err = |line: usize, message: String| Error::Parse {
        path: origin.to_path_buf(),
        line,
        message,
    };
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| parse_err(1, e.to_string()))?;
    if header.iter().collect::<Vec<_>>().join(",") != RECORDS_HEADER {
        return Err(parse_err(1, format!("expected header `{RECORDS_HEADER}`")));
    }
    let mut out = Vec::new();
    for row in reader.deserialize::<SampleRecord>() {
        let record = row.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            parse_err(line, e.to_string())
        })?;
        out.push(record);
    }
    Ok(out)
}

/// Reads a map CSV written by the FDTD engine (rows along the transverse axis).
pub fn read_map(path: &Path) -> Result<(usize, usize, Vec<f64>)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_reader(text.as_bytes());
    let (mut nx, mut ny, mut values) = (0, 0, Vec::new());
    for (j, row) in reader.records().enumerate() {
        let row = row.map_err(|e| Error::Parse {
            path: path.into(),
            line: j + 1,
            message: e.to_string(),
        })?;
        if j == 0 {
            nx = row.len();
        } else if row.len() != nx {
            return Err(Error::Parse {
                path: path.into(),
                line: j + 1,
                message: format!("expected {nx} values"),
            });
        }
        for field in row.iter() {
            values.push(field.trim().parse::<f64>().map_err(|e| Error::Parse {
                path: path.into(),
                line: j + 1,
                message: format!("{field}: {e}"),
            })?);
        }
        ny += 1;
    }
    if nx == 0 {
        return Err(Error::Parse {
            path: path.into(),
            line: 1,
            message: "empty map".into(),
        });
    }
    Ok((nx, ny, values))
}
