//! Yee leapfrog stepping for the (Ez, Hx, Hy) polarization.
//!
//! Grid: Ez(i, j) at (iΔ, jΔ); Hx(i, j) at (iΔ, (j+½)Δ); Hy(i, j) at
//! ((i+½)Δ, jΔ). Arrays are stored column by column (`i * ny + j`). The
//! transverse axis is periodic, the propagation axis is terminated by CPML
//! strips backed by PEC walls at i = 0 and i = nx − 1.
//!
//! Within one step the state advances from (E^n, H^{n−½}, J^{n−½}) to
//! (E^{n+1}, H^{n+½}, J^{n+½}).

use num_complex::Complex64;

use super::geometry::{self, Layout, Segment};
use super::SimConfig;
use crate::error::{Error, Result};
use crate::materials::{MaterialModel, StackSpec};
use crate::units;

/// CPML polynomial grading order.
const CPML_ORDER: f64 = 3.0;
const CPML_KAPPA_MAX: f64 = 1.0;
const CPML_ALPHA_MAX: f64 = 0.05;
/// Source pulse centre sits this many 1/e amplitude widths after t = 0.
const SOURCE_DELAY_WIDTHS: f64 = 6.0;
/// How often the whole Ez grid is scanned for non-finite values.
const DIVERGENCE_CHECK_INTERVAL: usize = 100;

/// Gaussian-modulated sine current. Its power spectrum falls to 1/e² at the
/// band edges, measured in frequency about the band-centre frequency.
#[derive(Debug, Clone, Copy)]
pub struct GaussianPulse {
    pub omega0: f64,
    pub tau: f64,
    pub t0: f64,
}

impl GaussianPulse {
    pub fn for_band(band_nm: [f64; 2]) -> Self {
        let w_hi = units::wavelength_nm_to_omega(band_nm[0]);
        let w_lo = units::wavelength_nm_to_omega(band_nm[1]);
        let omega0 = 0.5 * (w_hi + w_lo);
        // power spectrum exp(−(ω−ω₀)²τ²) equals e^{-2} at ω₀ ± Δω
        let tau = std::f64::consts::SQRT_2 / (0.5 * (w_hi - w_lo));
        Self {
            omega0,
            tau,
            t0: SOURCE_DELAY_WIDTHS * tau,
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        let s = t - self.t0;
        (self.omega0 * s).sin() * (-0.5 * s * s / (self.tau * self.tau)).exp()
    }

    /// Time after which the pulse is treated as off.
    pub fn end_time(&self) -> f64 {
        2.0 * self.t0
    }
}

#[derive(Debug, Clone, Copy)]
enum PoleKind {
    /// J^{n+½} = a·J^{n−½} + w·b·E^n
    Drude { a: f64, b: f64 },
    /// P^{n+1} = c1·P^n + c2·P^{n−1} + w·c3·E^n, J^{n+½} = (P^{n+1} − P^n)/Δt
    Lorentz { c1: f64, c2: f64, c3: f64 },
}

/// Polarization current of one dispersive term of one segment, allocated only
/// over the columns that segment touches.
#[derive(Debug, Clone)]
struct PoleField {
    kind: PoleKind,
    col0: usize,
    weights: Vec<f64>,
    j: Vec<f64>,
    p: Vec<f64>,
    p_prev: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct FieldState {
    pub ez: Vec<f64>,
    pub hx: Vec<f64>,
    pub hy: Vec<f64>,
}

#[derive(Debug, Clone, Copy, Default)]
struct CpmlCoeff {
    b: f64,
    c: f64,
    inv_kappa: f64,
}

/// Running DFT of Ez, Hx and Hy over columns `col0..=col1` (all rows), plus
/// Hy at col0 − ½ so that flux through either box edge can be formed.
#[derive(Debug, Clone)]
pub(crate) struct DftRegion {
    pub col0: usize,
    pub col1: usize,
    /// [wavelength][(i − col0)·ny + j]
    pub ez: Vec<Vec<Complex64>>,
    /// [wavelength][(i − col0)·ny + j]
    pub hx: Vec<Vec<Complex64>>,
    /// [wavelength][(i − col0 + 1)·ny + j], i ∈ col0−1 ..= col1
    pub hy: Vec<Vec<Complex64>>,
}

impl DftRegion {
    fn new(col0: usize, col1: usize, ny: usize, n_freq: usize) -> Self {
        let cols = col1 - col0 + 1;
        let zero = |n: usize| vec![vec![Complex64::new(0.0, 0.0); n]; n_freq];
        Self {
            col0,
            col1,
            ez: zero(cols * ny),
            hx: zero(cols * ny),
            hy: zero((cols + 1) * ny),
        }
    }

    pub fn contains_columns(&self, c0: usize, c1: usize) -> bool {
        self.col0 <= c0 && c1 <= self.col1
    }
}

pub struct Simulation {
    pub(crate) config: SimConfig,
    pub(crate) stack: StackSpec,
    pub(crate) layout: Layout,
    pub(crate) segments: Vec<Segment>,
    /// fractions[segment][column]
    pub(crate) fractions: Vec<Vec<f64>>,
    pub(crate) dx: f64,
    pub(crate) dt: f64,
    pub(crate) eps_inf: Vec<f64>,
    ca: Vec<f64>,
    cb: Vec<f64>,
    poles: Vec<PoleField>,
    cpml_e: Vec<CpmlCoeff>,
    cpml_h: Vec<CpmlCoeff>,
    psi_ez: Vec<f64>,
    psi_hy: Vec<f64>,
    pub(crate) fields: FieldState,
    pub(crate) source: GaussianPulse,
    source_enabled: bool,
    pub(crate) omegas: Vec<f64>,
    pub(crate) regions: Vec<DftRegion>,
    pub(crate) step_count: usize,
    pub(crate) warnings: Vec<String>,
    /// Incident flux per unit transverse length at each monitor wavelength,
    /// filled in by `run`.
    pub(crate) incident: Option<std::sync::Arc<Vec<f64>>>,
}

fn cpml_coeff(depth: f64, dx: f64, dt: f64) -> CpmlCoeff {
    if depth <= 0.0 {
        return CpmlCoeff {
            b: 0.0,
            c: 0.0,
            inv_kappa: 1.0,
        };
    }
    let d = depth.min(1.0);
    // σ_max = 0.8(m+1)/(η₀Δx) with η₀ = 1 in program units
    let sigma_max = 0.8 * (CPML_ORDER + 1.0) / dx;
    let sigma = sigma_max * d.powf(CPML_ORDER);
    let kappa = 1.0 + (CPML_KAPPA_MAX - 1.0) * d.powf(CPML_ORDER);
    let alpha = CPML_ALPHA_MAX * (1.0 - d);
    let b = (-(sigma / kappa + alpha) * dt).exp();
    let c = if sigma > 0.0 {
        sigma / (sigma * kappa + kappa * kappa * alpha) * (b - 1.0)
    } else {
        0.0
    };
    CpmlCoeff {
        b,
        c,
        inv_kappa: 1.0 / kappa,
    }
}

/// Program-unit static conductivity and the ADE terms of one material.
fn dispersive_terms(model: &MaterialModel, dt: f64) -> (f64, Vec<PoleKind>) {
    let MaterialModel::DrudeLorentz(m) = model else {
        return (0.0, Vec::new());
    };
    let mut kinds = Vec::new();
    let wp = units::ev_to_omega(m.drude_plasma_energy_ev);
    if wp > 0.0 {
        let gamma = units::ev_to_omega(m.drude_damping_energy_ev);
        let a = (-gamma * dt).exp();
        kinds.push(PoleKind::Drude {
            a,
            b: wp * wp * (1.0 - a) / gamma,
        });
    }
    for p in m.lorentz_poles.iter().filter(|p| p.strength > 0.0) {
        let w0 = units::ev_to_omega(p.resonance_energy_ev);
        let g = units::ev_to_omega(p.damping_energy_ev);
        let d = 1.0 + 0.5 * g * dt;
        kinds.push(PoleKind::Lorentz {
            c1: (2.0 - w0 * w0 * dt * dt) / d,
            c2: -(1.0 - 0.5 * g * dt) / d,
            c3: p.strength * w0 * w0 * dt * dt / d,
        });
    }
    (
        units::conductivity_si_to_program(m.static_conductivity),
        kinds,
    )
}

impl Simulation {
    /// Rasterizes `stack` and registers the reflection, transmission and
    /// lossy-region monitors.
    pub fn build(stack: &StackSpec, config: &SimConfig) -> Result<Self> {
        let layout = Layout::new(config)?;
        let (segments, fractions) = geometry::rasterize(stack, config, &layout)?;
        let (nx, ny) = (layout.nx, layout.ny);
        let dx = config.dx_um();
        let dt = config.dt();

        let mut eps_inf = vec![0.0; nx];
        let mut sigma = vec![0.0; nx];
        let mut poles = Vec::new();
        for (seg, frac) in segments.iter().zip(&fractions) {
            let (sig, kinds) = dispersive_terms(&seg.material, dt);
            for i in 0..nx {
                eps_inf[i] += frac[i] * seg.material.eps_inf();
                sigma[i] += frac[i] * sig;
            }
            let Some(first) = frac.iter().position(|&f| f > 0.0) else {
                continue;
            };
            let last = frac.iter().rposition(|&f| f > 0.0).expect("has a first");
            for kind in kinds {
                let cols = last - first + 1;
                let lorentz = matches!(kind, PoleKind::Lorentz { .. });
                let buf = |on: bool| if on { vec![0.0; cols * ny] } else { Vec::new() };
                poles.push(PoleField {
                    kind,
                    col0: first,
                    weights: frac[first..=last].to_vec(),
                    j: vec![0.0; cols * ny],
                    p: buf(lorentz),
                    p_prev: buf(lorentz),
                });
            }
        }
        let ca = (0..nx)
            .map(|i| (eps_inf[i] / dt - 0.5 * sigma[i]) / (eps_inf[i] / dt + 0.5 * sigma[i]))
            .collect();
        let cb = (0..nx)
            .map(|i| 1.0 / (eps_inf[i] / dt + 0.5 * sigma[i]))
            .collect();

        let np = layout.pml_cells;
        let pml_len = np as f64 * dx;
        let x_left = np as f64 * dx;
        let x_right = (nx - 1 - np) as f64 * dx;
        let depth = |x: f64| {
            if pml_len <= 0.0 {
                0.0
            } else if x < x_left {
                (x_left - x) / pml_len
            } else if x > x_right {
                (x - x_right) / pml_len
            } else {
                0.0
            }
        };
        let cpml_e = (0..nx)
            .map(|i| cpml_coeff(depth(i as f64 * dx), dx, dt))
            .collect();
        let cpml_h = (0..nx - 1)
            .map(|i| cpml_coeff(depth((i as f64 + 0.5) * dx), dx, dt))
            .collect();

        let omegas: Vec<f64> = config
            .monitor_wavelengths_nm
            .iter()
            .map(|&w| units::wavelength_nm_to_omega(w))
            .collect();
        let nf = omegas.len();
        let mut regions = vec![
            DftRegion::new(layout.reflection, layout.reflection, ny, nf),
            DftRegion::new(layout.transmission, layout.transmission, ny, nf),
        ];
        let lossy: Vec<usize> = (0..nx)
            .filter(|&i| is_lossy_column(&segments, &fractions, i))
            .collect();
        if let (Some(&lo), Some(&hi)) = (lossy.first(), lossy.last()) {
            let (in_lo, in_hi) = layout.interior();
            regions.push(DftRegion::new(
                (lo.saturating_sub(2)).max(in_lo + 1),
                (hi + 2).min(in_hi - 1),
                ny,
                nf,
            ));
        }

        let mut warnings = Vec::new();
        for seg in &segments[1..segments.len() - 1] {
            let thickness = seg.end_um - seg.start_um;
            if seg.material.is_lossy() && thickness < dx {
                warnings.push(format!(
                    "layer '{}' is {:.2} nm thick, thinner than one cell ({:.2} nm); represented by fill-fraction averaging only",
                    seg.name,
                    thickness * units::NM_PER_UM,
                    dx * units::NM_PER_UM
                ));
            }
        }

        Ok(Self {
            config: config.clone(),
            stack: stack.clone(),
            layout,
            segments,
            fractions,
            dx,
            dt,
            eps_inf,
            ca,
            cb,
            poles,
            cpml_e,
            cpml_h,
            psi_ez: vec![0.0; nx * ny],
            psi_hy: vec![0.0; (nx - 1) * ny],
            fields: FieldState {
                ez: vec![0.0; nx * ny],
                hx: vec![0.0; nx * ny],
                hy: vec![0.0; (nx - 1) * ny],
            },
            source: GaussianPulse::for_band(config.source_band_nm),
            source_enabled: true,
            omegas,
            regions,
            step_count: 0,
            warnings,
            incident: None,
        })
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn stack(&self) -> &StackSpec {
        &self.stack
    }

    pub fn fields(&self) -> &FieldState {
        &self.fields
    }

    pub fn steps_taken(&self) -> usize {
        self.step_count
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// Number of allocated polarization-current grids.
    pub fn pole_count(&self) -> usize {
        self.poles.len()
    }

    /// Overlap fraction of every segment (ambient, layers, substrate) at
    /// every column.
    pub fn fill_fractions(&self) -> &[Vec<f64>] {
        &self.fractions
    }

    pub fn time(&self) -> f64 {
        self.step_count as f64 * self.dt
    }

    /// Turns the line source on or off for all later steps.
    pub fn set_source_enabled(&mut self, on: bool) {
        self.source_enabled = on;
    }

    /// Overwrites Ez (column-major, `i * ny + j`) as an initial condition.
    pub fn set_ez(&mut self, ez: &[f64]) -> Result<()> {
        if ez.len() != self.fields.ez.len() {
            return Err(Error::Shape {
                layer: "ez".into(),
                expected: self.fields.ez.len(),
                got: ez.len(),
            });
        }
        self.fields.ez.copy_from_slice(ez);
        Ok(())
    }

    /// Registers an extra DFT region covering columns `col0..=col1`. Must be
    /// called before stepping.
    pub fn add_monitor_columns(&mut self, col0: usize, col1: usize) -> Result<()> {
        let (lo, hi) = self.layout.interior();
        if self.step_count > 0 {
            return Err(Error::Usage(
                "monitors must be registered before the first step".into(),
            ));
        }
        if !(lo < col0 && col0 <= col1 && col1 < hi) {
            return Err(Error::Geometry(format!(
                "monitor columns {col0}..={col1} must lie strictly inside the non-PML region ({lo}, {hi})"
            )));
        }
        self.regions.push(DftRegion::new(
            col0,
            col1,
            self.layout.ny,
            self.omegas.len(),
        ));
        Ok(())
    }

    /// ½ Σ (ε∞ Ez² + Hx² + Hy²) Δ² with E and H taken at their own time levels.
    pub fn energy(&self) -> f64 {
        let ny = self.layout.ny;
        let f = &self.fields;
        let mut e = 0.0;
        for (i, eps) in self.eps_inf.iter().enumerate() {
            e += eps
                * f.ez[i * ny..(i + 1) * ny]
                    .iter()
                    .map(|v| v * v)
                    .sum::<f64>();
        }
        let h: f64 = f.hx.iter().chain(&f.hy).map(|v| v * v).sum();
        0.5 * (e + h) * self.dx * self.dx
    }

    /// max |Ez| over the transmission-plane column.
    pub fn probe_max(&self) -> f64 {
        let ny = self.layout.ny;
        let c = self.layout.transmission;
        self.fields.ez[c * ny..(c + 1) * ny]
            .iter()
            .fold(0.0, |m, v| m.max(v.abs()))
    }

    /// One leapfrog cycle.
    pub fn step(&mut self) -> Result<()> {
        let n = self.step_count;
        self.update_h();
        self.update_poles();
        self.update_e(n);
        self.step_count += 1;
        if !self.omegas.is_empty() {
            self.accumulate_dft();
        }
        let check = self.step_count % DIVERGENCE_CHECK_INTERVAL == 0;
        if !self.probe_max().is_finite() || (check && self.fields.ez.iter().any(|v| !v.is_finite()))
        {
            return Err(Error::Divergence {
                step: self.step_count,
            });
        }
        Ok(())
    }

    fn update_h(&mut self) {
        let (nx, ny) = (self.layout.nx, self.layout.ny);
        let s = self.dt / self.dx;
        let inv_dx = 1.0 / self.dx;
        let FieldState { ez, hx, hy } = &mut self.fields;
        for i in 0..nx {
            let col = &ez[i * ny..(i + 1) * ny];
            let hxc = &mut hx[i * ny..(i + 1) * ny];
            for j in 0..ny - 1 {
                hxc[j] -= s * (col[j + 1] - col[j]);
            }
            hxc[ny - 1] -= s * (col[0] - col[ny - 1]);
        }
        for i in 0..nx - 1 {
            let k = self.cpml_h[i];
            let (left, right) = ez.split_at((i + 1) * ny);
            let e0 = &left[i * ny..];
            let e1 = &right[..ny];
            let hyc = &mut hy[i * ny..(i + 1) * ny];
            if k.c == 0.0 {
                for j in 0..ny {
                    hyc[j] += s * (e1[j] - e0[j]);
                }
            } else {
                let psi = &mut self.psi_hy[i * ny..(i + 1) * ny];
                for j in 0..ny {
                    let d = (e1[j] - e0[j]) * inv_dx;
                    psi[j] = k.b * psi[j] + k.c * d;
                    hyc[j] += self.dt * (d * k.inv_kappa + psi[j]);
                }
            }
        }
    }

    fn update_poles(&mut self) {
        let ny = self.layout.ny;
        let dt = self.dt;
        let ez = &self.fields.ez;
        for pole in &mut self.poles {
            for (c, &w) in pole.weights.iter().enumerate() {
                let i = pole.col0 + c;
                let e = &ez[i * ny..(i + 1) * ny];
                let range = c * ny..(c + 1) * ny;
                match pole.kind {
                    PoleKind::Drude { a, b } => {
                        let wb = w * b;
                        for (jv, ev) in pole.j[range].iter_mut().zip(e) {
                            *jv = a * *jv + wb * ev;
                        }
                    }
                    PoleKind::Lorentz { c1, c2, c3 } => {
                        let wc3 = w * c3;
                        let j = &mut pole.j[range.clone()];
                        let p = &mut pole.p[range.clone()];
                        let pp = &mut pole.p_prev[range];
                        for k in 0..ny {
                            let next = c1 * p[k] + c2 * pp[k] + wc3 * e[k];
                            j[k] = (next - p[k]) / dt;
                            pp[k] = p[k];
                            p[k] = next;
                        }
                    }
                }
            }
        }
    }

    fn update_e(&mut self, n: usize) {
        let (nx, ny) = (self.layout.nx, self.layout.ny);
        let inv_dx = 1.0 / self.dx;
        let FieldState { ez, hx, hy } = &mut self.fields;
        for i in 1..nx - 1 {
            let (ca, cb) = (self.ca[i], self.cb[i]);
            let k = self.cpml_e[i];
            let hy0 = &hy[(i - 1) * ny..i * ny];
            let hy1 = &hy[i * ny..(i + 1) * ny];
            let hxc = &hx[i * ny..(i + 1) * ny];
            let e = &mut ez[i * ny..(i + 1) * ny];
            let psi = &mut self.psi_ez[i * ny..(i + 1) * ny];
            for j in 0..ny {
                let jm = if j == 0 { ny - 1 } else { j - 1 };
                let mut dhy = (hy1[j] - hy0[j]) * inv_dx;
                if k.c != 0.0 {
                    psi[j] = k.b * psi[j] + k.c * dhy;
                    dhy = dhy * k.inv_kappa + psi[j];
                }
                let curl = dhy - (hxc[j] - hxc[jm]) * inv_dx;
                e[j] = ca * e[j] + cb * curl;
            }
        }
        for pole in &self.poles {
            for c in 0..pole.weights.len() {
                let i = pole.col0 + c;
                let cb = self.cb[i];
                for (ev, jv) in ez[i * ny..(i + 1) * ny]
                    .iter_mut()
                    .zip(&pole.j[c * ny..(c + 1) * ny])
                {
                    *ev -= cb * jv;
                }
            }
        }
        let t_half = (n as f64 + 0.5) * self.dt;
        if self.source_enabled && t_half <= self.source.end_time() {
            let i = self.layout.source;
            let amp = self.cb[i] * self.source.value(t_half) * inv_dx;
            for v in &mut ez[i * ny..(i + 1) * ny] {
                *v -= amp;
            }
        }
    }

    fn accumulate_dft(&mut self) {
        let ny = self.layout.ny;
        let t_e = self.step_count as f64 * self.dt;
        let t_h = t_e - 0.5 * self.dt;
        let FieldState { ez, hx, hy } = &self.fields;
        for region in &mut self.regions {
            let (c0, c1) = (region.col0, region.col1);
            let ez_src = &ez[c0 * ny..(c1 + 1) * ny];
            let hx_src = &hx[c0 * ny..(c1 + 1) * ny];
            let hy_src = &hy[(c0 - 1) * ny..(c1 + 1) * ny];
            for (f, &w) in self.omegas.iter().enumerate() {
                let pe = Complex64::from_polar(1.0, w * t_e);
                let ph = Complex64::from_polar(1.0, w * t_h);
                accumulate(&mut region.ez[f], ez_src, pe);
                accumulate(&mut region.hx[f], hx_src, ph);
                accumulate(&mut region.hy[f], hy_src, ph);
            }
        }
    }

    /// Continuum ε(ω) of the fill-averaged material at column `i`.
    pub(crate) fn column_permittivity(&self, i: usize, omega: f64) -> Complex64 {
        self.segments
            .iter()
            .zip(&self.fractions)
            .filter(|(_, f)| f[i] > 0.0)
            .map(|(s, f)| f[i] * s.material.permittivity_at_omega(omega))
            .sum()
    }
}

fn accumulate(acc: &mut [Complex64], src: &[f64], phase: Complex64) {
    for (a, &v) in acc.iter_mut().zip(src) {
        a.re += v * phase.re;
        a.im += v * phase.im;
    }
}

fn is_lossy_column(segments: &[Segment], fractions: &[Vec<f64>], i: usize) -> bool {
    segments
        .iter()
        .zip(fractions)
        .any(|(s, f)| f[i] > 0.0 && s.material.is_lossy())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pulse_spectrum_edges_at_e_minus_two() {
        let p = GaussianPulse::for_band([300.0, 1500.0]);
        let w_hi = units::wavelength_nm_to_omega(300.0);
        let dw = w_hi - p.omega0;
        assert!(((dw * p.tau).powi(2) - 2.0).abs() < 1e-12);
        assert!(p.value(p.end_time()).abs() < 1e-7);
    }

    #[test]
    fn cpml_interior_is_transparent() {
        let c = cpml_coeff(0.0, 0.02, 0.01);
        assert_eq!((c.b, c.c, c.inv_kappa), (0.0, 0.0, 1.0));
        let c = cpml_coeff(1.0, 0.02, 0.01);
        assert!(c.b > 0.0 && c.b < 1.0 && c.c < 0.0);
    }
}
