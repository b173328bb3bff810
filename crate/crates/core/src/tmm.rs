//! Transfer-matrix optics of planar stacks at normal incidence.
//!
//! Characteristic matrices follow the exp(−iωt) convention with N = n + ik:
//!
//! ```text
//! M = | cos δ        −i sin δ / N |      δ = 2π N d / λ
//!     | −i N sin δ    cos δ       |
//! ```
//!
//! Admittances are in units of the free-space admittance, so a medium of
//! index N has admittance N.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::materials::{permittivity, refractive_index, MaterialModel, StackSpec};

pub type Matrix2 = [[Complex64; 2]; 2];

fn mat_mul(a: &Matrix2, b: &Matrix2) -> Matrix2 {
    let mut out = [[Complex64::new(0.0, 0.0); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

fn mat_vec(a: &Matrix2, v: [Complex64; 2]) -> [Complex64; 2] {
    [
        a[0][0] * v[0] + a[0][1] * v[1],
        a[1][0] * v[0] + a[1][1] * v[1],
    ]
}

fn complex_index(model: &MaterialModel, wavelength_nm: f64) -> Result<Complex64> {
    let (n, k) = refractive_index(permittivity(model, wavelength_nm)?)?;
    Ok(Complex64::new(n, k))
}

/// Characteristic matrix of one homogeneous layer.
pub fn layer_matrix(
    model: &MaterialModel,
    thickness_nm: f64,
    wavelength_nm: f64,
) -> Result<Matrix2> {
    if !(thickness_nm >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "thickness must be >= 0, got {thickness_nm}"
        )));
    }
    let n = complex_index(model, wavelength_nm)?;
    let delta = 2.0 * PI * n * thickness_nm / wavelength_nm;
    let (c, s) = (delta.cos(), delta.sin());
    let i = Complex64::i();
    Ok([[c, -i * s / n], [-i * n * s, c]])
}

pub fn determinant(m: &Matrix2) -> Complex64 {
    m[0][0] * m[1][1] - m[0][1] * m[1][0]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RtaPoint {
    pub wavelength_nm: f64,
    pub reflectance: f64,
    pub transmittance: f64,
    pub absorptance: f64,
    /// Fraction of the incident power dissipated in each layer.
    pub per_layer_absorptance: Vec<f64>,
}

/// Reflectance, transmittance and absorptance of `stack` at one wavelength.
pub fn rta(stack: &StackSpec, wavelength_nm: f64) -> Result<RtaPoint> {
    let eta0 = complex_index(&stack.ambient, wavelength_nm)?;
    let eta_s = complex_index(&stack.substrate, wavelength_nm)?;

    // Tangential (E, H) just above each interface, normalised to unit field
    // at the substrate side of the last interface.
    let mut fields = Vec::with_capacity(stack.layers.len() + 1);
    let mut v = [Complex64::new(1.0, 0.0), eta_s];
    fields.push(v);
    for layer in stack.layers.iter().rev() {
        let m = layer_matrix(&layer.material, layer.thickness_nm, wavelength_nm)?;
        v = mat_vec(&m, v);
        fields.push(v);
    }
    fields.reverse();
    let [b, c] = fields[0];
    let denom = eta0 * b + c;
    let r = (eta0 * b - c) / denom;
    let e_inc = denom / (2.0 * eta0);
    let incident = eta0.re * e_inc.norm_sqr();

    let net_flux = |f: &[Complex64; 2]| (f[0] * f[1].conj()).re / incident;
    let reflectance = r.norm_sqr();
    let transmittance = net_flux(&fields[fields.len() - 1]);
    let per_layer: Vec<f64> = fields
        .windows(2)
        .map(|w| net_flux(&w[0]) - net_flux(&w[1]))
        .collect();
    let absorptance = net_flux(&fields[0]) - transmittance;

    Ok(RtaPoint {
        wavelength_nm,
        reflectance,
        transmittance,
        absorptance,
        per_layer_absorptance: per_layer,
    })
}

/// Product of all layer matrices, first layer leftmost.
pub fn stack_matrix(stack: &StackSpec, wavelength_nm: f64) -> Result<Matrix2> {
    let mut total = [
        [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)],
        [Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)],
    ];
    for layer in &stack.layers {
        total = mat_mul(
            &total,
            &layer_matrix(&layer.material, layer.thickness_nm, wavelength_nm)?,
        );
    }
    Ok(total)
}

/// [`rta`] over a list of wavelengths, order preserved.
pub fn spectrum(stack: &StackSpec, wavelengths_nm: &[f64]) -> Result<Vec<RtaPoint>> {
    if wavelengths_nm.is_empty() {
        return Err(Error::InvalidArgument("wavelength list is empty".into()));
    }
    wavelengths_nm
        .iter()
        .map(|&w| {
            rta(stack, w).map_err(|e| Error::AtWavelength {
                wavelength_nm: w,
                source: Box::new(e),
            })
        })
        .collect()
}

/// Effective extinction coefficient k = α λ / 4π with α ≈ −ln T / d.
pub fn extinction_from_transmittance(
    transmittance: f64,
    thickness_nm: f64,
    wavelength_nm: f64,
) -> Result<f64> {
    if !(transmittance > 0.0 && transmittance <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "transmittance must lie in (0, 1], got {transmittance}"
        )));
    }
    if !(thickness_nm > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "thickness must be > 0, got {thickness_nm}"
        )));
    }
    Ok(-transmittance.ln() / thickness_nm * wavelength_nm / (4.0 * PI))
}

/// Wavelength of the largest value in `values`, refined by a parabola through
/// the peak and its neighbours when the grid is uniform there.
pub fn peak_wavelength(wavelengths_nm: &[f64], values: &[f64]) -> Option<f64> {
    let (idx, _) = values
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))?;
    if idx == 0 || idx + 1 == values.len() {
        return Some(wavelengths_nm[idx]);
    }
    let (x0, x1, x2) = (
        wavelengths_nm[idx - 1],
        wavelengths_nm[idx],
        wavelengths_nm[idx + 1],
    );
    let (y0, y1, y2) = (values[idx - 1], values[idx], values[idx + 1]);
    let h = x1 - x0;
    if ((x2 - x1) - h).abs() > 1e-9 * h.abs() {
        return Some(x1);
    }
    let curvature = y0 - 2.0 * y1 + y2;
    if curvature >= 0.0 {
        return Some(x1);
    }
    Some(x1 + 0.5 * h * (y0 - y2) / curvature)
}

/// Writes `wavelength_nm,R,T,A,A_layer_1,...` with C-style `%.9e` numbers.
pub fn spectrum_csv(points: &[RtaPoint]) -> String {
    use crate::format::sci9;
    let n_layers = points.first().map_or(0, |p| p.per_layer_absorptance.len());
    let mut out = String::from("wavelength_nm,R,T,A");
    for i in 1..=n_layers {
        out.push_str(&format!(",A_layer_{i}"));
    }
    out.push('\n');
    for p in points {
        out.push_str(&sci9(p.wavelength_nm));
        for v in [p.reflectance, p.transmittance, p.absorptance]
            .into_iter()
            .chain(p.per_layer_absorptance.iter().copied())
        {
            out.push(',');
            out.push_str(&sci9(v));
        }
        out.push('\n');
    }
    out
}
