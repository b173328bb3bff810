use std::fmt::Write as _;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OpticsRow {
    pub wavelength_nm: f64,
    pub n: f64,
    pub k: f64,
}

impl OpticsRow {
    /// ε = (n + ik)².
    pub fn permittivity(&self) -> Complex64 {
        let nk = Complex64::new(self.n, self.k);
        nk * nk
    }
}

/// Tabulated optical constants, strictly increasing in wavelength.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpticsTable {
    rows: Vec<OpticsRow>,
}

impl OpticsTable {
    pub fn new(rows: Vec<OpticsRow>) -> Result<Self> {
        if rows.len() < 2 {
            return Err(Error::InvalidArgument(format!(
                "optics table needs at least 2 rows, got {}",
                rows.len()
            )));
        }
        for w in rows.windows(2) {
            if w[1].wavelength_nm <= w[0].wavelength_nm {
                return Err(Error::InvalidArgument(format!(
                    "optics table wavelengths must be strictly increasing ({} then {})",
                    w[0].wavelength_nm, w[1].wavelength_nm
                )));
            }
        }
        if let Some(r) = rows
            .iter()
            .find(|r| r.k < 0.0 || !r.n.is_finite() || !r.k.is_finite())
        {
            return Err(Error::InvalidArgument(format!(
                "optics table row at {} nm has invalid (n, k) = ({}, {})",
                r.wavelength_nm, r.n, r.k
            )));
        }
        if rows[0].wavelength_nm <= 0.0 {
            return Err(Error::InvalidArgument(
                "optics table wavelengths must be positive".into(),
            ));
        }
        Ok(Self { rows })
    }

    pub fn rows(&self) -> &[OpticsRow] {
        &self.rows
    }

    pub fn wavelength_range(&self) -> (f64, f64) {
        (
            self.rows[0].wavelength_nm,
            self.rows[self.rows.len() - 1].wavelength_nm,
        )
    }

    /// Rows with wavelength inside `[lo, hi]`.
    pub fn rows_in_band(&self, lo: f64, hi: f64) -> impl Iterator<Item = &OpticsRow> {
        self.rows
            .iter()
            .filter(move |r| r.wavelength_nm >= lo && r.wavelength_nm <= hi)
    }

    /// Linear interpolation of (n, k) at `wavelength_nm`; `None` outside the table.
    pub fn interpolate(&self, wavelength_nm: f64) -> Option<(f64, f64)> {
        let (lo, hi) = self.wavelength_range();
        if wavelength_nm < lo || wavelength_nm > hi {
            return None;
        }
        let idx = self
            .rows
            .partition_point(|r| r.wavelength_nm < wavelength_nm);
        if idx == 0 {
            return Some((self.rows[0].n, self.rows[0].k));
        }
        let (a, b) = (&self.rows[idx - 1], &self.rows[idx]);
        let t = (wavelength_nm - a.wavelength_nm) / (b.wavelength_nm - a.wavelength_nm);
        Some((a.n + t * (b.n - a.n), a.k + t * (b.k - a.k)))
    }

    /// Parses `wavelength_nm,n,k` CSV with a header row.
    pub fn parse_csv(text: &str, origin: &Path) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, header)) if header.trim() == "wavelength_nm,n,k" => {}
            Some((_, header)) => {
                return Err(Error::Parse {
                    path: origin.to_path_buf(),
                    line: 1,
                    message: format!("expected header 'wavelength_nm,n,k', found '{header}'"),
                })
            }
            None => {
                return Err(Error::Parse {
                    path: origin.to_path_buf(),
                    line: 1,
                    message: "empty file".into(),
                })
            }
        }
        let mut rows = Vec::new();
        for (idx, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let parse_err = |message: String| Error::Parse {
                path: origin.to_path_buf(),
                line: idx + 1,
                message,
            };
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 3 {
                return Err(parse_err(format!(
                    "expected 3 fields, found {}",
                    fields.len()
                )));
            }
            let mut vals = [0.0; 3];
            for (v, f) in vals.iter_mut().zip(&fields) {
                *v = f
                    .trim()
                    .parse()
                    .map_err(|e| parse_err(format!("bad number '{f}': {e}")))?;
            }
            rows.push(OpticsRow {
                wavelength_nm: vals[0],
                n: vals[1],
                k: vals[2],
            });
        }
        Self::new(rows)
    }

    pub fn load_csv(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_csv(&text, path)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("wavelength_nm,n,k\n");
        for r in &self.rows {
            let _ = writeln!(out, "{},{},{}", r.wavelength_nm, r.n, r.k);
        }
        out
    }
}
