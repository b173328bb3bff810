//! Exact Shapley attribution over groups of model inputs with an
//! interventional (background replacement) value function.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::SampleRecord;
use crate::error::{Error, Result};
use crate::format::sci9;
use crate::surrogate::{partitions, usable_records, RawInput, Surrogate, TrainConfig};

/// Largest background set used by default; larger sets are subsampled.
pub const BACKGROUND_CAP: usize = 256;
/// Smallest instance count accepted by [`global_importance`].
pub const MIN_INSTANCES: usize = 10;
const MAX_GROUPS: usize = 16;

/// A batch function with one scalar output per input row.
pub trait ScalarModel: Sync {
    fn width(&self) -> usize;
    /// `rows` is row-major with [`ScalarModel::width`] columns.
    fn eval(&self, rows: &[f64]) -> Result<Vec<f64>>;
}

/// Adapts a per-row closure.
pub struct FnModel<F> {
    pub width: usize,
    pub f: F,
}

impl<F: Fn(&[f64]) -> f64 + Sync> ScalarModel for FnModel<F> {
    fn width(&self) -> usize {
        self.width
    }

    fn eval(&self, rows: &[f64]) -> Result<Vec<f64>> {
        Ok(rows.chunks(self.width).map(&self.f).collect())
    }
}

/// One output column of a surrogate, fed scaled features and returning
/// physical units.
pub struct SurrogateOutput<'a> {
    pub model: &'a Surrogate,
    pub output: usize,
}

impl ScalarModel for SurrogateOutput<'_> {
    fn width(&self) -> usize {
        self.model.network.input_width()
    }

    fn eval(&self, rows: &[f64]) -> Result<Vec<f64>> {
        let width = self.model.outputs();
        if self.output >= width {
            return Err(Error::InvalidArgument(format!(
                "output {} of a {width}-output model",
                self.output
            )));
        }
        let y = self.model.predict_features(rows)?;
        Ok(y.into_iter().skip(self.output).step_by(width).collect())
    }
}

/// Named groups of input indices that together partition the input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureGroups {
    pub names: Vec<String>,
    pub indices: Vec<Vec<usize>>,
    width: usize,
}

impl FeatureGroups {
    pub fn new(names: Vec<String>, indices: Vec<Vec<usize>>, width: usize) -> Result<Self> {
        if names.len() != indices.len() {
            return Err(Error::Grouping(format!(
                "{} names for {} groups",
                names.len(),
                indices.len()
            )));
        }
        if indices.is_empty() || indices.len() > MAX_GROUPS {
            return Err(Error::Grouping(format!(
                "need 1 to {MAX_GROUPS} groups, got {}",
                indices.len()
            )));
        }
        let mut owner = vec![None; width];
        for (g, group) in indices.iter().enumerate() {
            if group.is_empty() {
                return Err(Error::Grouping(format!("group '{}' is empty", names[g])));
            }
            for &i in group {
                match owner.get_mut(i) {
                    None => {
                        return Err(Error::Grouping(format!(
                            "index {i} outside input width {width}"
                        )))
                    }
                    Some(Some(prev)) => {
                        return Err(Error::Grouping(format!(
                            "index {i} in both '{}' and '{}'",
                            names[*prev], names[g]
                        )))
                    }
                    Some(slot) => *slot = Some(g),
                }
            }
        }
        if let Some(i) = owner.iter().position(Option::is_none) {
            return Err(Error::Grouping(format!("index {i} belongs to no group")));
        }
        Ok(Self {
            names,
            indices,
            width,
        })
    }

    /// Thickness, wavelength, and the material one-hot pair as one group.
    pub fn design() -> Self {
        Self::new(
            vec!["thickness".into(), "wavelength".into(), "material".into()],
            vec![vec![0], vec![1], vec![2, 3]],
            4,
        )
        .expect("fixed grouping is a partition")
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn width(&self) -> usize {
        self.width
    }
}

/// Attribution of one instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Explanation {
    /// The explained input row.
    pub instance: Vec<f64>,
    /// Mean model output over the background.
    pub base_value: f64,
    /// One value per group, in model output units.
    pub phi: Vec<f64>,
    /// Model output at the instance.
    pub prediction: f64,
}

/// Up to `cap` background rows chosen without replacement by a generator
/// seeded with `seed`, kept in their original order.
pub fn subsample_background(rows: &[f64], width: usize, cap: usize, seed: u64) -> Vec<f64> {
    let n = rows.len() / width;
    if n <= cap {
        return rows.to_vec();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = sample(&mut rng, n, cap).into_vec();
    picked.sort_unstable();
    picked
        .iter()
        .flat_map(|&i| rows[i * width..(i + 1) * width].iter().copied())
        .collect()
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Exact Shapley values of `instance` for each group, enumerating every
/// coalition. The value of a coalition is the model output averaged over
/// background rows whose coalition features are replaced by the instance's.
pub fn shapley_exact(
    model: &dyn ScalarModel,
    instance: &[f64],
    background: &[f64],
    groups: &FeatureGroups,
) -> Result<Explanation> {
    let width = model.width();
    if groups.width() != width {
        return Err(Error::Grouping(format!(
            "groups cover {} inputs, model takes {width}",
            groups.width()
        )));
    }
    if instance.len() != width {
        return Err(Error::Shape {
            layer: "instance".into(),
            expected: width,
            got: instance.len(),
        });
    }
    if background.is_empty() || background.len() % width != 0 {
        return Err(Error::Shape {
            layer: "background".into(),
            expected: width,
            got: background.len(),
        });
    }
    let rows = background.len() / width;
    let n = groups.len();
    let coalitions = 1usize << n;

    let mut batch = Vec::with_capacity(coalitions * background.len() + width);
    for mask in 0..coalitions {
        for row in background.chunks(width) {
            let start = batch.len();
            batch.extend_from_slice(row);
            for (g, idx) in groups.indices.iter().enumerate() {
                if mask & (1 << g) != 0 {
                    for &i in idx {
                        batch[start + i] = instance[i];
                    }
                }
            }
        }
    }
    batch.extend_from_slice(instance);
    let out = model.eval(&batch)?;
    if out.len() != coalitions * rows + 1 {
        return Err(Error::Shape {
            layer: "model output".into(),
            expected: coalitions * rows + 1,
            got: out.len(),
        });
    }
    let value: Vec<f64> = out[..coalitions * rows]
        .chunks(rows)
        .map(|c| c.iter().sum::<f64>() / rows as f64)
        .collect();

    let weight: Vec<f64> = (0..n)
        .map(|s| factorial(s) * factorial(n - s - 1) / factorial(n))
        .collect();
    let phi = (0..n)
        .map(|g| {
            let bit = 1 << g;
            (0..coalitions)
                .filter(|m| m & bit == 0)
                .map(|m| weight[m.count_ones() as usize] * (value[m | bit] - value[m]))
                .sum()
        })
        .collect();
    Ok(Explanation {
        instance: instance.to_vec(),
        base_value: value[0],
        phi,
        prediction: out[coalitions * rows],
    })
}

/// Per-group mean |φ| over many instances, with the ranking and the
/// per-instance explanations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalImportance {
    pub groups: Vec<String>,
    pub mean_abs_phi: Vec<f64>,
    /// Group indices ordered from most to least important.
    pub ranking: Vec<usize>,
    pub explanations: Vec<Explanation>,
}

impl GlobalImportance {
    /// Group names from most to least important.
    pub fn ranked_names(&self) -> Vec<&str> {
        self.ranking
            .iter()
            .map(|&g| self.groups[g].as_str())
            .collect()
    }
}

/// Explains every row of `instances` (in parallel) and ranks the groups by
/// mean absolute attribution. Ties keep group order.
pub fn global_importance(
    model: &dyn ScalarModel,
    instances: &[f64],
    background: &[f64],
    groups: &FeatureGroups,
) -> Result<GlobalImportance> {
    let width = model.width();
    if instances.len() % width != 0 {
        return Err(Error::Shape {
            layer: "instances".into(),
            expected: width,
            got: instances.len(),
        });
    }
    let count = instances.len() / width;
    if count < MIN_INSTANCES {
        return Err(Error::InvalidArgument(format!(
            "global importance needs at least {MIN_INSTANCES} instances, got {count}"
        )));
    }
    let explanations = instances
        .par_chunks(width)
        .map(|row| shapley_exact(model, row, background, groups))
        .collect::<Result<Vec<_>>>()?;
    let mean_abs_phi: Vec<f64> = (0..groups.len())
        .map(|g| explanations.iter().map(|e| e.phi[g].abs()).sum::<f64>() / count as f64)
        .collect();
    let mut ranking: Vec<usize> = (0..groups.len()).collect();
    ranking.sort_by(|&a, &b| mean_abs_phi[b].total_cmp(&mean_abs_phi[a]));
    Ok(GlobalImportance {
        groups: groups.names.clone(),
        mean_abs_phi,
        ranking,
        explanations,
    })
}

/// Global importance of one output of a trained surrogate on sweep records.
/// The background is the model's training partition of the usable records
/// (subsampled to [`BACKGROUND_CAP`] rows); the explained instances are up
/// to `instances` usable records drawn without replacement with `seed`.
pub fn explain_surrogate(
    model: &Surrogate,
    records: &[SampleRecord],
    output: usize,
    instances: usize,
    seed: u64,
) -> Result<GlobalImportance> {
    let usable = usable_records(records);
    let inputs: Vec<RawInput> = usable.iter().map(|r| RawInput::from(*r)).collect();
    let features = model.features(&inputs)?;
    let width = model.network.input_width();
    let config = model.train_config.clone().unwrap_or_else(TrainConfig::mlp);
    let (train_idx, _, _) = partitions(inputs.len(), &config)?;
    let train_rows: Vec<f64> = train_idx
        .iter()
        .flat_map(|&i| features[i * width..(i + 1) * width].iter().copied())
        .collect();
    let background = subsample_background(&train_rows, width, BACKGROUND_CAP, seed);
    let chosen = subsample_background(&features, width, instances, seed.wrapping_add(1));
    global_importance(
        &SurrogateOutput { model, output },
        &chosen,
        &background,
        &FeatureGroups::design(),
    )
}

/// `instance_id,base_value,phi_<group>...,prediction`, one line per
/// explanation.
pub fn explanations_csv(explanations: &[Explanation], groups: &FeatureGroups) -> String {
    let mut out = String::from("instance_id,base_value");
    for name in &groups.names {
        out.push_str(&format!(",phi_{name}"));
    }
    out.push_str(",prediction\n");
    for (id, e) in explanations.iter().enumerate() {
        out.push_str(&format!("{id},{}", sci9(e.base_value)));
        for p in &e.phi {
            out.push_str(&format!(",{}", sci9(*p)));
        }
        out.push_str(&format!(",{}\n", sci9(e.prediction)));
    }
    out
}

/// `rank,group,mean_abs_phi`, most important first.
pub fn summary_csv(importance: &GlobalImportance) -> String {
    let mut out = String::from("rank,group,mean_abs_phi\n");
    for (rank, &g) in importance.ranking.iter().enumerate() {
        out.push_str(&format!(
            "{},{},{}\n",
            rank + 1,
            importance.groups[g],
            sci9(importance.mean_abs_phi[g])
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shapley_weights_sum_to_one_per_group() {
        let n = 3;
        let total: f64 = (0..1usize << n)
            .filter(|m| m & 1 == 0)
            .map(|m: usize| {
                factorial(m.count_ones() as usize) * factorial(n - m.count_ones() as usize - 1)
                    / factorial(n)
            })
            .sum();
        assert!((total - 1.0).abs() < 1e-15);
    }

    #[test]
    fn groups_must_partition() {
        let mk = |idx: Vec<Vec<usize>>| {
            let names = (0..idx.len()).map(|k| format!("g{k}")).collect();
            FeatureGroups::new(names, idx, 4)
        };
        assert!(mk(vec![vec![0], vec![1], vec![2, 3]]).is_ok());
        assert!(matches!(
            mk(vec![vec![0], vec![1], vec![2]]),
            Err(Error::Grouping(_))
        ));
        assert!(matches!(
            mk(vec![vec![0, 1], vec![1], vec![2, 3]]),
            Err(Error::Grouping(_))
        ));
        assert!(matches!(
            mk(vec![vec![0], vec![1], vec![2, 4]]),
            Err(Error::Grouping(_))
        ));
        assert!(matches!(
            mk(vec![vec![0, 1, 2, 3], vec![]]),
            Err(Error::Grouping(_))
        ));
    }

    #[test]
    fn subsample_keeps_order_and_cap() {
        let rows: Vec<f64> = (0..600).map(|k| k as f64).collect();
        let sub = subsample_background(&rows, 2, 256, 1);
        assert_eq!(sub.len(), 512);
        assert!(sub.chunks(2).all(|r| r[1] == r[0] + 1.0));
        assert!(sub
            .chunks(2)
            .zip(sub.chunks(2).skip(1))
            .all(|(a, b)| a[0] < b[0]));
        assert_eq!(sub, subsample_background(&rows, 2, 256, 1));
        assert_eq!(
            subsample_background(&rows[..20], 2, 256, 1),
            rows[..20].to_vec()
        );
    }
}
