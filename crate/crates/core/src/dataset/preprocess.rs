//! Feature scaling, categorical encoding, gap filling and dataset splits.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::SampleRecord;
use crate::error::{Error, Result};
use crate::materials::Metal;

/// Fixed one-hot column order, persisted in every manifest and model file.
pub const ONE_HOT_ORDER: [Metal; 2] = [Metal::Au, Metal::Ag];

/// Population mean and standard deviation of one feature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalerParams {
    pub mean: f64,
    pub std: f64,
}

impl ScalerParams {
    /// Population statistics of `values`.
    pub fn fit(name: &str, values: &[f64]) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::DegenerateFeature(name.to_string()));
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let std = var.sqrt();
        if !(std > 0.0) || !std.is_finite() {
            return Err(Error::DegenerateFeature(name.to_string()));
        }
        Ok(Self { mean, std })
    }

    pub fn scale(&self, x: f64) -> f64 {
        (x - self.mean) / self.std
    }

    pub fn unscale(&self, z: f64) -> f64 {
        z * self.std + self.mean
    }
}

/// z = (x − μ)/σ. Fits μ and σ when `params` is `None`.
pub fn standardize(
    name: &str,
    values: &[f64],
    params: Option<ScalerParams>,
) -> Result<(Vec<f64>, ScalerParams)> {
    let p = match params {
        Some(p) => p,
        None => ScalerParams::fit(name, values)?,
    };
    Ok((values.iter().map(|&x| p.scale(x)).collect(), p))
}

/// Au → [1, 0], Ag → [0, 1].
pub fn one_hot(material: &str) -> Result<[f64; 2]> {
    let metal = Metal::parse(material)?;
    let mut v = [0.0; 2];
    let idx = ONE_HOT_ORDER
        .iter()
        .position(|m| *m == metal)
        .expect("every metal has a column");
    v[idx] = 1.0;
    Ok(v)
}

/// Replaces invalid targets with the mean of the nearest valid neighbours in
/// wavelength within the same (material, thickness) series, or the single
/// neighbour at a series edge. Filled records get `imputed = true`.
pub fn impute_local_average(records: &[SampleRecord]) -> Result<Vec<SampleRecord>> {
    let mut out = records.to_vec();
    let mut series: Vec<(Metal, f64)> = Vec::new();
    for r in records {
        if !series
            .iter()
            .any(|(m, t)| *m == r.material && *t == r.thickness_nm)
        {
            series.push((r.material, r.thickness_nm));
        }
    }
    for (metal, thickness) in series {
        let mut idx: Vec<usize> = (0..out.len())
            .filter(|&i| out[i].material == metal && out[i].thickness_nm == thickness)
            .collect();
        idx.sort_by(|&a, &b| out[a].wavelength_nm.total_cmp(&out[b].wavelength_nm));
        let valid: Vec<usize> = idx.iter().copied().filter(|&i| out[i].is_valid()).collect();
        if valid.len() < 2 {
            return Err(Error::Imputation(format!("{metal} {thickness} nm")));
        }
        for (pos, &i) in idx.iter().enumerate() {
            if out[i].is_valid() {
                continue;
            }
            let below = idx[..pos]
                .iter()
                .rev()
                .find(|&&k| out[k].is_valid())
                .copied();
            let above = idx[pos + 1..].iter().find(|&&k| out[k].is_valid()).copied();
            let neighbours: Vec<usize> = below.into_iter().chain(above).collect();
            let mean = |f: fn(&SampleRecord) -> f64| {
                neighbours.iter().map(|&k| f(&out[k])).sum::<f64>() / neighbours.len() as f64
            };
            let power = mean(|r| r.absorbed_power);
            let flux = mean(|r| r.absorbed_flux);
            out[i].absorbed_power = power;
            out[i].absorbed_flux = flux;
            out[i].imputed = true;
        }
    }
    Ok(out)
}

/// Seeded shuffle of 0..n followed by a contiguous partition. Sizes are
/// floor(n·rᵢ); the remainder goes one apiece to the partitions with the
/// largest fractional parts (earlier partitions win ties).
pub fn split(n: usize, ratios: &[f64], seed: u64) -> Result<Vec<Vec<usize>>> {
    if ratios.is_empty() || ratios.iter().any(|r| !(*r >= 0.0)) {
        return Err(Error::Split(format!(
            "ratios must be non-negative, got {ratios:?}"
        )));
    }
    let total: f64 = ratios.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::Split(format!("ratios must sum to 1, got {total}")));
    }
    let exact: Vec<f64> = ratios.iter().map(|r| r * n as f64).collect();
    let mut sizes: Vec<usize> = exact.iter().map(|x| (x + 1e-9).floor() as usize).collect();
    let mut remainder = n - sizes.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..ratios.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = exact[a] - sizes[a] as f64;
        let fb = exact[b] - sizes[b] as f64;
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    for &k in order.iter().cycle() {
        if remainder == 0 {
            break;
        }
        sizes[k] += 1;
        remainder -= 1;
    }
    if let Some(k) = sizes.iter().position(|&s| s == 0) {
        return Err(Error::Split(format!(
            "partition {k} would be empty ({n} records, ratios {ratios:?})"
        )));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut parts = Vec::with_capacity(sizes.len());
    let mut start = 0;
    for s in sizes {
        parts.push(idx[start..start + s].to_vec());
        start += s;
    }
    Ok(parts)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(w: f64, power: f64, valid: bool) -> SampleRecord {
        SampleRecord {
            material: Metal::Au,
            thickness_nm: 20.0,
            wavelength_nm: w,
            absorbed_power: if valid { power } else { f64::NAN },
            absorbed_flux: if valid { power / 2.0 } else { f64::NAN },
            map_path: None,
            valid,
            imputed: false,
        }
    }

    #[test]
    fn standardize_hand_example() {
        let (z, p) = standardize("x", &[1.0, 2.0, 3.0], None).unwrap();
        assert!((p.mean - 2.0).abs() < 1e-15);
        assert!((p.std - (2.0f64 / 3.0).sqrt()).abs() < 1e-15);
        let expect = [-1.224744871, 0.0, 1.224744871];
        for (a, b) in z.iter().zip(expect) {
            assert!((a - b).abs() < 1e-9);
        }
        let (z, _) = standardize("x", &[2.0], Some(p)).unwrap();
        assert_eq!(z, vec![0.0]);
        for x in [-3.5, 0.0, 1e3] {
            assert!((p.unscale(p.scale(x)) - x).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_variance_is_degenerate() {
        assert!(matches!(
            standardize("t", &[4.0, 4.0, 4.0], None),
            Err(Error::DegenerateFeature(_))
        ));
    }

    #[test]
    fn one_hot_order() {
        assert_eq!(one_hot("Au").unwrap(), [1.0, 0.0]);
        assert_eq!(one_hot("Ag").unwrap(), [0.0, 1.0]);
        assert!(matches!(one_hot("Cu"), Err(Error::Encoding(_))));
    }

    #[test]
    fn impute_examples() {
        let out = impute_local_average(&[
            rec(400.0, 1.0, true),
            rec(500.0, 0.0, false),
            rec(600.0, 3.0, true),
        ])
        .unwrap();
        assert_eq!(out[1].absorbed_power, 2.0);
        assert!(out[1].imputed && !out[1].valid);
        let out = impute_local_average(&[
            rec(400.0, 0.0, false),
            rec(500.0, 4.0, true),
            rec(600.0, 6.0, true),
        ])
        .unwrap();
        assert_eq!(out[0].absorbed_power, 4.0);
        let clean = [rec(400.0, 1.0, true), rec(500.0, 2.0, true)];
        assert_eq!(impute_local_average(&clean).unwrap(), clean.to_vec());
        assert!(matches!(
            impute_local_average(&[rec(400.0, 1.0, true), rec(500.0, 0.0, false)]),
            Err(Error::Imputation(_))
        ));
    }

    #[test]
    fn split_sizes_and_determinism() {
        let parts = split(100, &[0.8, 0.2], 1).unwrap();
        assert_eq!((parts[0].len(), parts[1].len()), (80, 20));
        let mut all: Vec<usize> = parts.concat();
        all.sort();
        assert_eq!(all, (0..100).collect::<Vec<_>>());
        assert_eq!(parts, split(100, &[0.8, 0.2], 1).unwrap());
        let parts = split(20, &[0.7, 0.15, 0.15], 3).unwrap();
        assert_eq!(
            parts.iter().map(Vec::len).collect::<Vec<_>>(),
            vec![14, 3, 3]
        );
        let parts = split(10, &[0.7, 0.15, 0.15], 3).unwrap();
        assert_eq!(
            parts.iter().map(Vec::len).collect::<Vec<_>>(),
            vec![7, 2, 1]
        );
        assert!(matches!(
            split(2, &[0.7, 0.15, 0.15], 0),
            Err(Error::Split(_))
        ));
        assert!(matches!(split(10, &[0.5, 0.4], 0), Err(Error::Split(_))));
    }
}
