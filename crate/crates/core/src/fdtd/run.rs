//! Running a simulation to decay and turning the DFT monitors into spectra,
//! absorbed-power maps and flux-box absorption.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::engine::{DftRegion, Simulation};
use super::geometry::Layout;
use super::SimConfig;
use crate::error::{Error, Result};
use crate::format::sci9;
use crate::materials::{Manifest, Metal, StackSpec};
use crate::units;

/// Decay is tested this often once the source has finished.
pub const DECAY_CHECK_INTERVAL: usize = 100;

/// Recorded in every run's metadata.
pub const ORIENTATION_NOTE: &str =
    "normal incidence along the first grid axis; layers uniform along the \
periodic transverse axis; illuminated from the ambient (ITO) side; Ez polarization";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralPoint {
    pub wavelength_nm: f64,
    /// Volume integral of W_abs over the whole domain, fraction of incident.
    pub absorbed_power: f64,
    /// Net inward flux into the box bounding the absorber, fraction of incident.
    pub absorbed_flux: f64,
    /// Volume integral of W_abs over the same box as `absorbed_flux`.
    pub absorbed_power_box: f64,
    pub reflectance: f64,
    pub transmittance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralResult {
    pub points: Vec<SpectralPoint>,
    pub steps: usize,
    pub decayed: bool,
    pub warnings: Vec<String>,
}

impl SpectralResult {
    pub fn wavelengths(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.wavelength_nm).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out =
            String::from("wavelength_nm,absorbed_power,absorbed_flux,absorbed_power_box,R,T\n");
        for p in &self.points {
            let row = [
                p.wavelength_nm,
                p.absorbed_power,
                p.absorbed_flux,
                p.absorbed_power_box,
                p.reflectance,
                p.transmittance,
            ];
            out.push_str(&row.iter().map(|v| sci9(*v)).collect::<Vec<_>>().join(","));
            out.push('\n');
        }
        out
    }
}

/// W_abs normalized to incident power: Σ values × spacing² is the absorbed
/// fraction. `values[j * nx + i]`, i along the propagation axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbsorptionMap {
    pub wavelength_nm: f64,
    pub nx: usize,
    pub ny: usize,
    pub spacing_um: f64,
    pub values: Vec<f64>,
}

impl AbsorptionMap {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.nx + i]
    }

    /// Σ W_abs · cell area.
    pub fn total(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.spacing_um * self.spacing_um
    }

    /// One line per transverse row, `%.9e` values.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.values.len() * 17);
        for row in self.values.chunks(self.nx) {
            out.push_str(&row.iter().map(|v| sci9(*v)).collect::<Vec<_>>().join(","));
            out.push('\n');
        }
        out
    }

    /// Area-average onto a `width × height` grid (width along propagation).
    pub fn downsample(&self, width: usize, height: usize) -> Result<Vec<f64>> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidArgument(
                "downsampled grid must be non-empty".into(),
            ));
        }
        // each source cell is spread over the target cells it overlaps
        let (sx, sy) = (
            width as f64 / self.nx as f64,
            height as f64 / self.ny as f64,
        );
        let mut out = vec![0.0; width * height];
        let spans = |n: usize, scale: f64, target: usize| -> Vec<Vec<(usize, f64)>> {
            (0..n)
                .map(|k| {
                    let (lo, hi) = (k as f64 * scale, (k + 1) as f64 * scale);
                    let first = lo.floor() as usize;
                    let last = ((hi.ceil() as usize).max(first + 1)).min(target);
                    (first..last)
                        .filter_map(|t| {
                            let w = (hi.min((t + 1) as f64) - lo.max(t as f64)).max(0.0);
                            (w > 0.0).then_some((t, w))
                        })
                        .collect()
                })
                .collect()
        };
        let xs = spans(self.nx, sx, width);
        let ys = spans(self.ny, sy, height);
        for j in 0..self.ny {
            for i in 0..self.nx {
                let v = self.get(i, j);
                if v == 0.0 {
                    continue;
                }
                for &(ty, wy) in &ys[j] {
                    for &(tx, wx) in &xs[i] {
                        out[ty * width + tx] += v * wx * wy;
                    }
                }
            }
        }
        // overlaps are in target-cell units, so each target's weights sum to 1
        Ok(out)
    }
}

/// Closed rectangle of Ez nodes: columns `col0..=col1`, rows `row0..=row1`.
/// A box spanning every row has no transverse edges (periodic axis).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FluxBox {
    pub col0: usize,
    pub col1: usize,
    pub row0: usize,
    pub row1: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunMetadata {
    pub config: SimConfig,
    pub stack: StackSpec,
    pub layout: Layout,
    pub orientation: String,
    pub materials_manifest_hash: String,
    pub steps: usize,
    pub warnings: Vec<String>,
}

type IncidentSlot = Arc<Mutex<Option<Arc<Vec<f64>>>>>;

/// Incident flux for `config`, computed once per process by an empty-stack run.
pub fn incident_flux(config: &SimConfig) -> Result<Arc<Vec<f64>>> {
    static CACHE: OnceLock<Mutex<HashMap<String, IncidentSlot>>> = OnceLock::new();
    let key = serde_json::to_string(config)?;
    let slot = {
        let mut map = CACHE
            .get_or_init(Default::default)
            .lock()
            .expect("cache lock");
        map.entry(key).or_default().clone()
    };
    let mut guard = slot.lock().expect("slot lock");
    if let Some(v) = guard.as_ref() {
        return Ok(v.clone());
    }
    let mut sim = Simulation::build(&StackSpec::empty(), config)?;
    sim.step_until_decay()?;
    let plane = sim.layout.reflection;
    let flux = Arc::new(sim.plane_flux(plane)?);
    if let Some(w) = flux.iter().position(|f| !(*f > 0.0)) {
        return Err(Error::InvalidArgument(format!(
            "source carries no power at {} nm; widen the source band",
            config.monitor_wavelengths_nm[w]
        )));
    }
    *guard = Some(flux.clone());
    Ok(flux)
}

fn cross_re(e: Complex64, h: Complex64) -> f64 {
    (e * h.conj()).re
}

impl Simulation {
    /// Steps until the probe-line field has decayed below the threshold or
    /// `max_steps` is reached. Returns whether decay was reached.
    pub fn step_until_decay(&mut self) -> Result<bool> {
        let mut peak: f64 = 0.0;
        let source_end = self.source.end_time();
        while self.step_count < self.config.max_steps {
            self.step()?;
            let probe = self.probe_max();
            peak = peak.max(probe);
            if self.time() > source_end
                && self.step_count % DECAY_CHECK_INTERVAL == 0
                && probe <= self.config.decay_threshold * peak
            {
                return Ok(true);
            }
        }
        self.warnings.push(format!(
            "incomplete decay: max_steps = {} reached before the probe field fell below {:e} of its peak",
            self.config.max_steps, self.config.decay_threshold
        ));
        Ok(false)
    }

    /// Runs the normalization (cached), steps to decay and extracts spectra
    /// and one absorption map per monitor wavelength.
    pub fn run(&mut self) -> Result<(SpectralResult, Vec<AbsorptionMap>)> {
        if self.omegas.is_empty() {
            return Err(Error::InvalidArgument(
                "at least one monitor wavelength is required".into(),
            ));
        }
        if self.step_count > 0 {
            return Err(Error::Usage(
                "run() needs a freshly built simulation".into(),
            ));
        }
        self.incident = Some(incident_flux(&self.config)?);
        let decayed = self.step_until_decay()?;
        let wavelengths = self.config.monitor_wavelengths_nm.clone();
        let maps = wavelengths
            .iter()
            .map(|&w| self.absorbed_power_map(w))
            .collect::<Result<Vec<_>>>()?;
        let refl = self.plane_flux(self.layout.reflection)?;
        let trans = self.plane_flux(self.layout.transmission)?;
        let boxed = self.absorber_box();
        let box_flux = match boxed {
            Some(b) => self.flux_spectrum(b)?,
            None => vec![0.0; wavelengths.len()],
        };
        let incident = self.incident.clone().expect("set above");
        let mut points = Vec::with_capacity(wavelengths.len());
        for (f, &w) in wavelengths.iter().enumerate() {
            let inc = incident[f];
            points.push(SpectralPoint {
                wavelength_nm: w,
                absorbed_power: maps[f].total(),
                absorbed_flux: box_flux[f],
                absorbed_power_box: boxed.map_or(0.0, |b| box_total(&maps[f], b)),
                reflectance: 1.0 - refl[f] / inc,
                transmittance: trans[f] / inc,
            });
        }
        points.sort_by(|a, b| a.wavelength_nm.total_cmp(&b.wavelength_nm));
        let result = SpectralResult {
            points,
            steps: self.step_count,
            decayed,
            warnings: self.warnings.clone(),
        };
        Ok((result, maps))
    }

    fn frequency_index(&self, wavelength_nm: f64) -> Result<usize> {
        self.config
            .monitor_wavelengths_nm
            .iter()
            .position(|&w| (w - wavelength_nm).abs() <= 1e-9 * w.max(1.0))
            .ok_or_else(|| Error::UnmonitoredWavelength {
                requested: wavelength_nm,
                available: self.config.monitor_wavelengths_nm.clone(),
            })
    }

    fn require_finished(&self) -> Result<&Arc<Vec<f64>>> {
        self.incident
            .as_ref()
            .ok_or_else(|| Error::Usage("simulation has not been run".into()))
    }

    /// Per-cell ½ ω ε″ |E|² divided by the incident power.
    pub fn absorbed_power_map(&self, wavelength_nm: f64) -> Result<AbsorptionMap> {
        let f = self.frequency_index(wavelength_nm)?;
        let incident = self.require_finished()?[f] * self.width_um();
        let omega = self.omegas[f];
        let (nx, ny) = (self.layout.nx, self.layout.ny);
        let mut values = vec![0.0; nx * ny];
        // regions 0 and 1 are the monitor planes; region 2, when present,
        // covers every lossy cell
        if let Some(region) = self.regions.get(2) {
            for i in region.col0..=region.col1 {
                let eps_im = self.column_permittivity(i, omega).im;
                if eps_im <= 0.0 {
                    continue;
                }
                let base = (i - region.col0) * ny;
                for j in 0..ny {
                    let e = region.ez[f][base + j];
                    values[j * nx + i] = 0.5 * omega * eps_im * e.norm_sqr() / incident;
                }
            }
        }
        Ok(AbsorptionMap {
            wavelength_nm,
            nx,
            ny,
            spacing_um: self.dx,
            values,
        })
    }

    /// Net inward Poynting flux through the edges of `b`, as a fraction of
    /// the incident power, at every monitor wavelength.
    pub fn flux_spectrum(&self, b: FluxBox) -> Result<Vec<f64>> {
        let incident = self.require_finished()?.clone();
        let (lo, hi) = self.layout.interior();
        if !(lo < b.col0
            && b.col0 <= b.col1
            && b.col1 < hi
            && b.row0 <= b.row1
            && b.row1 < self.layout.ny)
        {
            return Err(Error::Geometry(format!(
                "flux box {b:?} must lie strictly inside the non-PML columns ({lo}, {hi})"
            )));
        }
        let region = self.region_for(b.col0, b.col1)?;
        let width = self.width_um();
        Ok((0..self.omegas.len())
            .map(|f| self.box_flux(region, f, b) / (incident[f] * width))
            .collect())
    }

    fn region_for(&self, col0: usize, col1: usize) -> Result<&DftRegion> {
        self.regions.iter().find(|r| r.contains_columns(col0, col1)).ok_or_else(|| {
            Error::Geometry(format!(
                "no DFT monitor covers columns {col0}..={col1}; register one with add_monitor_columns"
            ))
        })
    }

    /// Absorbed power inside `b` (unnormalized) from the discrete Poynting
    /// theorem. The x edges pair E at the boundary node with the H sample
    /// half a cell outside the box.
    fn box_flux(&self, r: &DftRegion, f: usize, b: FluxBox) -> f64 {
        let ny = self.layout.ny;
        let ez = |i: usize, j: usize| r.ez[f][(i - r.col0) * ny + j];
        let hx = |i: usize, j: usize| r.hx[f][(i - r.col0) * ny + j];
        let hy = |i_minus_half: usize, j: usize| r.hy[f][(i_minus_half + 1 - r.col0) * ny + j];
        let mut total = 0.0;
        for j in b.row0..=b.row1 {
            // Sx = −½ Re(E H*) at the left edge enters, at the right edge leaves
            let left = -0.5 * cross_re(ez(b.col0, j), hy(b.col0 - 1, j));
            let right = -0.5 * cross_re(ez(b.col1, j), hy(b.col1, j));
            total += left - right;
        }
        if !(b.row0 == 0 && b.row1 == ny - 1) {
            let below = if b.row0 == 0 { ny - 1 } else { b.row0 - 1 };
            for i in b.col0..=b.col1 {
                // Sy = ½ Re(E Hx*)
                let bottom = 0.5 * cross_re(ez(i, b.row0), hx(i, below));
                let top = 0.5 * cross_re(ez(i, b.row1), hx(i, b.row1));
                total += bottom - top;
            }
        }
        total * self.dx
    }

    /// Flux per unit transverse length through the plane at column `c`, in
    /// +x, paired with Hy half a cell downstream.
    pub(crate) fn plane_flux(&self, c: usize) -> Result<Vec<f64>> {
        let r = self.region_for(c, c)?;
        let ny = self.layout.ny;
        Ok((0..self.omegas.len())
            .map(|f| {
                let s: f64 = (0..ny)
                    .map(|j| {
                        -0.5 * cross_re(
                            r.ez[f][(c - r.col0) * ny + j],
                            r.hy[f][(c + 1 - r.col0) * ny + j],
                        )
                    })
                    .sum();
                s * self.dx / self.width_um()
            })
            .collect())
    }

    fn width_um(&self) -> f64 {
        self.layout.ny as f64 * self.dx
    }

    /// Box over all rows tightly bounding the metal layer (or, without a
    /// metal layer, every lossy layer).
    pub fn absorber_box(&self) -> Option<FluxBox> {
        let inner = 1..self.segments.len() - 1;
        let metal: Vec<usize> = inner
            .clone()
            .filter(|&s| Metal::parse(&self.segments[s].name).is_ok())
            .collect();
        let chosen = if metal.is_empty() {
            inner
                .filter(|&s| self.segments[s].material.is_lossy())
                .collect()
        } else {
            metal
        };
        let spans: Vec<(usize, usize)> = chosen
            .iter()
            .filter_map(|&s| {
                let f = &self.fractions[s];
                Some((
                    f.iter().position(|&v| v > 0.0)?,
                    f.iter().rposition(|&v| v > 0.0)?,
                ))
            })
            .collect();
        let first = spans.iter().map(|s| s.0).min()?;
        let last = spans.iter().map(|s| s.1).max()?;
        Some(FluxBox {
            col0: first,
            col1: last,
            row0: 0,
            row1: self.layout.ny - 1,
        })
    }

    pub fn metadata(&self) -> RunMetadata {
        RunMetadata {
            config: self.config.clone(),
            stack: self.stack.clone(),
            layout: self.layout,
            orientation: ORIENTATION_NOTE.to_string(),
            materials_manifest_hash: Manifest::builtin().content_hash(),
            steps: self.step_count,
            warnings: self.warnings.clone(),
        }
    }

    /// First and last column touched by the layer called `name`.
    pub fn layer_columns(&self, name: &str) -> Option<(usize, usize)> {
        let s = (1..self.segments.len() - 1).find(|&s| self.segments[s].name == name)?;
        let f = &self.fractions[s];
        Some((
            f.iter().position(|&v| v > 0.0)?,
            f.iter().rposition(|&v| v > 0.0)?,
        ))
    }

    /// x position of column `i` in nm.
    pub fn column_position_nm(&self, i: usize) -> f64 {
        i as f64 * self.dx * units::NM_PER_UM
    }
}

fn box_total(map: &AbsorptionMap, b: FluxBox) -> f64 {
    let mut s = 0.0;
    for j in b.row0..=b.row1 {
        for i in b.col0..=b.col1 {
            s += map.get(i, j);
        }
    }
    s * map.spacing_um * map.spacing_um
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn downsample_preserves_mean_and_constants() {
        let map = AbsorptionMap {
            wavelength_nm: 600.0,
            nx: 10,
            ny: 7,
            spacing_um: 0.1,
            values: vec![2.5; 70],
        };
        let d = map.downsample(4, 3).unwrap();
        assert!(d.iter().all(|v| (v - 2.5).abs() < 1e-12), "{d:?}");
        let values: Vec<f64> = (0..70).map(|k| k as f64).collect();
        let map = AbsorptionMap { values, ..map };
        let d = map.downsample(4, 3).unwrap();
        let mean_in = map.values.iter().sum::<f64>() / 70.0;
        let mean_out = d.iter().sum::<f64>() / 12.0;
        assert!((mean_in - mean_out).abs() < 1e-12);
    }

    #[test]
    fn map_csv_shape() {
        let map = AbsorptionMap {
            wavelength_nm: 600.0,
            nx: 3,
            ny: 2,
            spacing_um: 0.1,
            values: vec![0.0; 6],
        };
        let csv = map.to_csv();
        assert_eq!(csv.lines().count(), 2);
        assert_eq!(csv.lines().next().unwrap().split(',').count(), 3);
    }
}
