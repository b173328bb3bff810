//! Damped least-squares fitting of Drude–Lorentz parameters to tabulated
//! optical constants.
//!
//! Every parameter is optimised through a bounded log-sigmoid map, so each
//! term stays passive and no pole can collapse to zero energy.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{refractive_index, DrudeLorentzModel, LorentzPole, MaterialModel, OpticsTable};
use crate::error::{Error, Result};
use crate::units;

/// RMS (n, k) residual accepted by [`fit_drude_lorentz`] unless overridden.
pub const DEFAULT_FIT_THRESHOLD: f64 = 0.25;

const MAX_POLES: usize = 4;
const INITIAL_EPS_INF: f64 = 2.0;
const INITIAL_DRUDE_DAMPING_EV: f64 = 0.1;
const INITIAL_LORENTZ_DAMPING_EV: f64 = 0.5;
const INITIAL_LORENTZ_STRENGTH: f64 = 1.0;
/// Fitted poles weaker than this are dropped from the returned model.
const NEGLIGIBLE_STRENGTH: f64 = 1e-4;

#[derive(Debug, Clone, Copy)]
pub struct FitOptions {
    /// Maximum accepted RMS residual over (n, k).
    pub threshold: f64,
    pub max_iterations: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            threshold: DEFAULT_FIT_THRESHOLD,
            max_iterations: 2000,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitReport {
    pub model: DrudeLorentzModel,
    /// sqrt(Σ (Δn² + Δk²) / 2N) over the rows inside the band.
    pub rms_nk_residual: f64,
    /// ½ Σ |ε_model − ε_table|².
    pub cost: f64,
    pub iterations: usize,
    pub band_nm: [f64; 2],
    pub rows_used: usize,
}

struct Sample {
    omega: f64,
    eps: Complex64,
}

/// Open interval (lo, hi) reached as lo·(hi/lo)^sigmoid(θ).
#[derive(Clone, Copy)]
struct Bounds {
    lo: f64,
    hi: f64,
}

impl Bounds {
    const fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    fn value(self, theta: f64) -> f64 {
        let s = 1.0 / (1.0 + (-theta).exp());
        self.lo * (self.hi / self.lo).powf(s)
    }

    fn param(self, value: f64) -> f64 {
        let s = ((value / self.lo).ln() / (self.hi / self.lo).ln()).clamp(1e-6, 1.0 - 1e-6);
        (s / (1.0 - s)).ln()
    }
}

// ε∞ − 1 is bounded rather than ε∞ so the ε∞ ≥ 1 invariant holds exactly.
const EPS_INF_EXCESS: Bounds = Bounds::new(1e-3, 30.0);
const PLASMA_EV: Bounds = Bounds::new(0.05, 40.0);
const DAMPING_EV: Bounds = Bounds::new(1e-4, 10.0);
const STRENGTH: Bounds = Bounds::new(1e-6, 200.0);
const RESONANCE_EV: Bounds = Bounds::new(0.1, 25.0);

fn unpack(theta: &[f64], n_poles: usize) -> DrudeLorentzModel {
    let poles = (0..n_poles)
        .map(|p| LorentzPole {
            strength: STRENGTH.value(theta[3 + 3 * p]),
            resonance_energy_ev: RESONANCE_EV.value(theta[4 + 3 * p]),
            damping_energy_ev: DAMPING_EV.value(theta[5 + 3 * p]),
        })
        .collect();
    DrudeLorentzModel {
        eps_inf: 1.0 + EPS_INF_EXCESS.value(theta[0]),
        drude_plasma_energy_ev: PLASMA_EV.value(theta[1]),
        drude_damping_energy_ev: DAMPING_EV.value(theta[2]),
        static_conductivity: 0.0,
        lorentz_poles: poles,
    }
}

fn residuals(theta: &[f64], n_poles: usize, samples: &[Sample], out: &mut Vec<f64>) {
    let model = unpack(theta, n_poles);
    out.clear();
    for s in samples {
        let d = model.permittivity_at_omega(s.omega) - s.eps;
        out.push(d.re);
        out.push(d.im);
    }
}

fn half_sq_norm(r: &[f64]) -> f64 {
    0.5 * r.iter().map(|x| x * x).sum::<f64>()
}

/// Solves the dense system `a x = b` by Gaussian elimination with partial pivoting.
fn solve_dense(mut a: Vec<f64>, mut b: Vec<f64>, n: usize) -> Option<Vec<f64>> {
    for col in 0..n {
        let pivot =
            (col..n).max_by(|&i, &j| a[i * n + col].abs().total_cmp(&a[j * n + col].abs()))?;
        if a[pivot * n + col].abs() < 1e-300 {
            return None;
        }
        if pivot != col {
            for k in 0..n {
                a.swap(col * n + k, pivot * n + k);
            }
            b.swap(col, pivot);
        }
        for row in col + 1..n {
            let f = a[row * n + col] / a[col * n + col];
            if f == 0.0 {
                continue;
            }
            for k in col..n {
                a[row * n + k] -= f * a[col * n + k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row * n + k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row * n + row];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

/// Levenberg–Marquardt from a single starting point. Returns (θ, cost, iterations).
fn levenberg_marquardt(
    mut theta: Vec<f64>,
    n_poles: usize,
    samples: &[Sample],
    max_iterations: usize,
) -> (Vec<f64>, f64, usize) {
    let p = theta.len();
    let mut r = Vec::new();
    residuals(&theta, n_poles, samples, &mut r);
    let m = r.len();
    let mut cost = half_sq_norm(&r);
    let mut lambda = 1e-3;
    let mut jac = vec![0.0; m * p];
    let (mut rp, mut rm, mut trial_r) = (Vec::new(), Vec::new(), Vec::new());
    let mut iterations = 0;

    while iterations < max_iterations && cost.is_finite() && cost > 1e-32 {
        iterations += 1;
        for j in 0..p {
            let h = 1e-6;
            let mut tp = theta.clone();
            tp[j] += h;
            residuals(&tp, n_poles, samples, &mut rp);
            tp[j] -= 2.0 * h;
            residuals(&tp, n_poles, samples, &mut rm);
            for i in 0..m {
                jac[i * p + j] = (rp[i] - rm[i]) / (2.0 * h);
            }
        }
        let mut jtj = vec![0.0; p * p];
        let mut jtr = vec![0.0; p];
        for i in 0..m {
            let row = &jac[i * p..(i + 1) * p];
            for a in 0..p {
                jtr[a] += row[a] * r[i];
                for b in 0..p {
                    jtj[a * p + b] += row[a] * row[b];
                }
            }
        }

        let mut accepted = false;
        let mut step_small = false;
        while lambda < 1e16 {
            let mut damped = jtj.clone();
            for a in 0..p {
                damped[a * p + a] += lambda * jtj[a * p + a].max(1e-12);
            }
            let rhs: Vec<f64> = jtr.iter().map(|g| -g).collect();
            if let Some(delta) = solve_dense(damped, rhs, p) {
                let trial: Vec<f64> = theta.iter().zip(&delta).map(|(t, d)| t + d).collect();
                residuals(&trial, n_poles, samples, &mut trial_r);
                let trial_cost = half_sq_norm(&trial_r);
                if trial_cost.is_finite() && trial_cost < cost {
                    let dnorm = delta.iter().map(|d| d * d).sum::<f64>().sqrt();
                    let tnorm = theta.iter().map(|t| t * t).sum::<f64>().sqrt();
                    step_small = dnorm < 1e-13 * (tnorm + 1e-13);
                    let rel_drop = (cost - trial_cost) / cost;
                    theta = trial;
                    std::mem::swap(&mut r, &mut trial_r);
                    cost = trial_cost;
                    lambda = (lambda / 3.0).max(1e-15);
                    accepted = true;
                    step_small |= rel_drop < 1e-15;
                    break;
                }
            }
            lambda *= 4.0;
        }
        if !accepted || step_small {
            break;
        }
    }
    (theta, cost, iterations)
}

fn rms_nk(model: &DrudeLorentzModel, table: &OpticsTable, band: [f64; 2]) -> Result<(f64, usize)> {
    let mut sum = 0.0;
    let mut count = 0;
    for row in table.rows_in_band(band[0], band[1]) {
        let eps = model.permittivity_at_omega(units::wavelength_nm_to_omega(row.wavelength_nm));
        let (n, k) = refractive_index(eps)?;
        sum += (n - row.n).powi(2) + (k - row.k).powi(2);
        count += 1;
    }
    Ok(((sum / (2.0 * count as f64)).sqrt(), count))
}

/// Candidate plasma energies: the ε′ zero crossing inside the band when the
/// table has one, and the free-electron estimate from the longest wavelength.
fn plasma_energy_seeds(samples: &[Sample]) -> Vec<f64> {
    let mut seeds = Vec::new();
    // samples are ordered by increasing wavelength, i.e. decreasing energy
    for w in samples.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        if a.eps.re.signum() != b.eps.re.signum() {
            let t = a.eps.re / (a.eps.re - b.eps.re);
            let omega = a.omega + t * (b.omega - a.omega);
            seeds.push(units::omega_to_ev(omega));
            break;
        }
    }
    let last = samples.last().expect("non-empty samples");
    if last.eps.re < 1.0 {
        seeds.push(units::omega_to_ev(last.omega) * (1.0 - last.eps.re).sqrt());
    }
    if seeds.is_empty() {
        seeds.push(units::omega_to_ev(last.omega));
    }
    seeds
}

/// Fits ε∞, one Drude term and `n_lorentz` Lorentz poles to the rows of
/// `table` inside `band_nm`, minimising Σ |ε_model − ε_table|².
pub fn fit_drude_lorentz(
    table: &OpticsTable,
    n_lorentz: usize,
    band_nm: [f64; 2],
    options: &FitOptions,
) -> Result<FitReport> {
    if n_lorentz > MAX_POLES {
        return Err(Error::InvalidArgument(format!(
            "at most {MAX_POLES} Lorentz poles supported, got {n_lorentz}"
        )));
    }
    let (lo, hi) = table.wavelength_range();
    if !(band_nm[0] < band_nm[1]) || band_nm[0] < lo || band_nm[1] > hi {
        return Err(Error::InvalidArgument(format!(
            "fit band {band_nm:?} nm must be increasing and inside the table range [{lo}, {hi}] nm"
        )));
    }
    let samples: Vec<Sample> = table
        .rows_in_band(band_nm[0], band_nm[1])
        .map(|r| Sample {
            omega: units::wavelength_nm_to_omega(r.wavelength_nm),
            eps: r.permittivity(),
        })
        .collect();
    let n_params = 3 + 3 * n_lorentz;
    if 2 * samples.len() < n_params {
        return Err(Error::InvalidArgument(format!(
            "band {band_nm:?} nm holds {} rows, too few for {n_params} parameters",
            samples.len()
        )));
    }

    let e_lo = units::wavelength_nm_to_ev(band_nm[1]);
    let e_hi = units::wavelength_nm_to_ev(band_nm[0]);
    let mut best: Option<(Vec<f64>, f64, usize)> = None;
    for plasma in plasma_energy_seeds(&samples) {
        let mut theta = vec![
            EPS_INF_EXCESS.param(INITIAL_EPS_INF - 1.0),
            PLASMA_EV.param(plasma),
            DAMPING_EV.param(INITIAL_DRUDE_DAMPING_EV),
        ];
        for p in 0..n_lorentz {
            let energy = e_lo + (p + 1) as f64 * (e_hi - e_lo) / (n_lorentz + 1) as f64;
            theta.extend([
                STRENGTH.param(INITIAL_LORENTZ_STRENGTH),
                RESONANCE_EV.param(energy),
                DAMPING_EV.param(INITIAL_LORENTZ_DAMPING_EV),
            ]);
        }
        let candidate = levenberg_marquardt(theta, n_lorentz, &samples, options.max_iterations);
        if best.as_ref().map_or(true, |b| candidate.1 < b.1) {
            best = Some(candidate);
        }
    }
    let (theta, cost, iterations) = best.expect("at least one seed");
    let mut model = unpack(&theta, n_lorentz);
    // a pole pinned at the strength floor contributes nothing but would give
    // the time-domain solver a needlessly slow, stiff mode
    model
        .lorentz_poles
        .retain(|p| p.strength > NEGLIGIBLE_STRENGTH);
    let (rms, rows_used) = rms_nk(&model, table, band_nm)?;
    if !(rms <= options.threshold) {
        return Err(Error::FitQuality {
            residual: rms,
            threshold: options.threshold,
        });
    }
    Ok(FitReport {
        model,
        rms_nk_residual: rms,
        cost,
        iterations,
        band_nm,
        rows_used,
    })
}

/// Samples `model` at the given wavelengths into an optics table.
pub fn tabulate(model: &MaterialModel, wavelengths_nm: &[f64]) -> Result<OpticsTable> {
    let rows = wavelengths_nm
        .iter()
        .map(|&w| {
            let (n, k) = refractive_index(super::permittivity(model, w)?)?;
            Ok(super::OpticsRow {
                wavelength_nm: w,
                n,
                k,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    OpticsTable::new(rows)
}
