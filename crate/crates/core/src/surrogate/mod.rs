//! Neural surrogates for the sweep data: an MLP regressor for the two
//! absorption targets and a convolutional decoder for absorption maps, both
//! with hand-written backpropagation.

mod io;
pub mod layers;
mod network;
mod train;

pub use io::{from_bytes, load_model, save_model, to_bytes, MODEL_MAGIC, MODEL_VERSION};
pub use layers::{BatchNorm, Conv, Dense, Layer, Shape, BN_EPS, BN_MOMENTUM};
pub use network::{Architecture, CnnArchitecture, MlpArchitecture, Network};
pub use train::{
    metrics, mse, train, Adam, EpochLog, LrEvent, Metrics, TrainConfig, TrainData, TrainReport,
};

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::{one_hot, read_map, split, SampleRecord, ScalerParams, ONE_HOT_ORDER};
use crate::error::{Error, Result};
use crate::fdtd::AbsorptionMap;
use crate::materials::Metal;

/// Width of the feature vector: scaled thickness, scaled wavelength and the
/// two one-hot material columns.
pub const FEATURES: usize = 4;
pub const MLP_TARGETS: [&str; 2] = ["absorbed_power", "absorbed_flux"];

/// Design parameters in physical units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RawInput {
    pub material: Metal,
    pub thickness_nm: f64,
    pub wavelength_nm: f64,
}

impl From<&SampleRecord> for RawInput {
    fn from(r: &SampleRecord) -> Self {
        Self {
            material: r.material,
            thickness_nm: r.thickness_nm,
            wavelength_nm: r.wavelength_nm,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InputScalers {
    pub thickness: ScalerParams,
    pub wavelength: ScalerParams,
}

impl InputScalers {
    pub fn fit(inputs: &[RawInput]) -> Result<Self> {
        let t: Vec<f64> = inputs.iter().map(|r| r.thickness_nm).collect();
        let w: Vec<f64> = inputs.iter().map(|r| r.wavelength_nm).collect();
        Ok(Self {
            thickness: ScalerParams::fit("thickness_nm", &t)?,
            wavelength: ScalerParams::fit("wavelength_nm", &w)?,
        })
    }

    pub fn features(&self, input: &RawInput) -> Result<[f64; FEATURES]> {
        let [a, b] = one_hot(input.material.symbol())?;
        Ok([
            self.thickness.scale(input.thickness_nm),
            self.wavelength.scale(input.wavelength_nm),
            a,
            b,
        ])
    }
}

/// A trained network together with everything needed to run it on
/// physical-unit inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct Surrogate {
    pub architecture: Architecture,
    pub network: Network,
    pub input_scalers: InputScalers,
    /// One scaler per output column, or a single scaler shared by all.
    pub target_scalers: Vec<ScalerParams>,
    pub target_names: Vec<String>,
    pub one_hot_order: Vec<Metal>,
    pub seed: u64,
    pub train_config: Option<TrainConfig>,
}

impl Surrogate {
    pub fn outputs(&self) -> usize {
        self.network.output_width()
    }

    fn target_scaler(&self, k: usize) -> ScalerParams {
        if self.target_scalers.len() == 1 {
            self.target_scalers[0]
        } else {
            self.target_scalers[k]
        }
    }

    /// Scaled feature matrix for `inputs`.
    pub fn features(&self, inputs: &[RawInput]) -> Result<Vec<f64>> {
        let mut x = Vec::with_capacity(inputs.len() * FEATURES);
        for r in inputs {
            x.extend(self.input_scalers.features(r)?);
        }
        Ok(x)
    }

    /// Network outputs for already scaled features, converted to physical units.
    pub fn predict_features(&self, x: &[f64]) -> Result<Vec<f64>> {
        let width = self.outputs();
        let mut y = self.network.predict(x)?;
        for row in y.chunks_mut(width) {
            for (k, v) in row.iter_mut().enumerate() {
                *v = self.target_scaler(k).unscale(*v);
            }
        }
        Ok(y)
    }

    /// Row-major predictions in physical units, one row per input.
    pub fn predict(&self, inputs: &[RawInput]) -> Result<Vec<f64>> {
        if inputs.is_empty() {
            return Err(Error::Evaluation("no inputs to predict".into()));
        }
        self.predict_features(&self.features(inputs)?)
    }
}

/// MAE and MSE of `model` on `inputs` against physical-unit `targets`
/// (row-major, one row per input).
pub fn evaluate(model: &Surrogate, inputs: &[RawInput], targets: &[f64]) -> Result<Metrics> {
    if inputs.is_empty() {
        return Err(Error::Evaluation("empty record set".into()));
    }
    metrics(&model.predict(inputs)?, targets, model.outputs())
}

/// Train, validation and test row indices from `config.split`. With two
/// ratios the second partition serves as both validation and test set.
pub fn partitions(n: usize, config: &TrainConfig) -> Result<(Vec<usize>, Vec<usize>, Vec<usize>)> {
    let parts = split(n, &config.split, config.seed)?;
    Ok(match parts.len() {
        2 => (parts[0].clone(), parts[1].clone(), parts[1].clone()),
        _ => (parts[0].clone(), parts[1].clone(), parts[2].clone()),
    })
}

fn scaled_targets(targets: &[f64], width: usize, scalers: &[ScalerParams]) -> Vec<f64> {
    targets
        .chunks(width)
        .flat_map(|row| {
            row.iter()
                .enumerate()
                .map(|(k, &v)| scalers[if scalers.len() == 1 { 0 } else { k }].scale(v))
        })
        .collect()
}

/// Fits scalers on the training rows, trains `arch` and evaluates on the
/// test rows. `targets` is row-major in physical units.
fn fit_surrogate(
    arch: Architecture,
    inputs: &[RawInput],
    targets: &[f64],
    target_names: Vec<String>,
    shared_target_scale: bool,
    config: &TrainConfig,
) -> Result<(Surrogate, TrainReport)> {
    config.validate()?;
    let width = arch.outputs();
    let (train_idx, val_idx, test_idx) = partitions(inputs.len(), config)?;
    let train_inputs: Vec<RawInput> = train_idx.iter().map(|&i| inputs[i]).collect();
    let input_scalers = InputScalers::fit(&train_inputs)?;
    let train_targets: Vec<f64> = train_idx
        .iter()
        .flat_map(|&i| targets[i * width..(i + 1) * width].iter().copied())
        .collect();
    let target_scalers = if shared_target_scale {
        // maps share one positive scale so zero stays zero
        let peak = train_targets.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if !(peak > 0.0) {
            return Err(Error::DegenerateFeature("map values".into()));
        }
        vec![ScalerParams {
            mean: 0.0,
            std: peak,
        }]
    } else {
        (0..width)
            .map(|k| {
                let col: Vec<f64> = train_targets
                    .iter()
                    .skip(k)
                    .step_by(width)
                    .copied()
                    .collect();
                ScalerParams::fit(&target_names[k], &col)
            })
            .collect::<Result<_>>()?
    };
    let mut model = Surrogate {
        architecture: arch.clone(),
        network: Network::build(&arch, config.seed)?,
        input_scalers,
        target_scalers,
        target_names,
        one_hot_order: ONE_HOT_ORDER.to_vec(),
        seed: config.seed,
        train_config: Some(config.clone()),
    };
    let x = model.features(inputs)?;
    let y = scaled_targets(targets, width, &model.target_scalers);
    let data = TrainData::new(x, y, FEATURES, width)?;
    let net = model.network.clone();
    let (net, mut report) = train(net, &data, &train_idx, &val_idx, config)?;
    model.network = net;
    let test_inputs: Vec<RawInput> = test_idx.iter().map(|&i| inputs[i]).collect();
    let test_targets: Vec<f64> = test_idx
        .iter()
        .flat_map(|&i| targets[i * width..(i + 1) * width].iter().copied())
        .collect();
    report.test = Some(evaluate(&model, &test_inputs, &test_targets)?);
    Ok((model, report))
}

/// Records usable for training: valid or imputed with finite targets.
pub fn usable_records(records: &[SampleRecord]) -> Vec<&SampleRecord> {
    records.iter().filter(|r| r.has_targets()).collect()
}

/// Trains the MLP on (absorbed power, absorbed flux).
pub fn train_mlp(
    records: &[SampleRecord],
    arch: MlpArchitecture,
    config: &TrainConfig,
) -> Result<(Surrogate, TrainReport)> {
    if arch.inputs != FEATURES || arch.outputs != MLP_TARGETS.len() {
        return Err(Error::InvalidArgument(format!(
            "the MLP maps {FEATURES} features to {} targets",
            MLP_TARGETS.len()
        )));
    }
    let usable = usable_records(records);
    let inputs: Vec<RawInput> = usable.iter().map(|r| RawInput::from(*r)).collect();
    let targets: Vec<f64> = usable
        .iter()
        .flat_map(|r| [r.absorbed_power, r.absorbed_flux])
        .collect();
    let names = MLP_TARGETS.iter().map(|s| s.to_string()).collect();
    fit_surrogate(
        Architecture::Mlp(arch),
        &inputs,
        &targets,
        names,
        false,
        config,
    )
}

/// One downsampled absorption map with the parameters that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct MapSample {
    pub input: RawInput,
    /// `values[row * width + col]`, columns along propagation.
    pub values: Vec<f64>,
}

/// Loads and area-averages every map referenced by valid records in a sweep
/// directory onto a `width × height` grid.
pub fn load_map_samples(
    sweep_dir: &Path,
    records: &[SampleRecord],
    grid: [usize; 2],
) -> Result<Vec<MapSample>> {
    let mut out = Vec::new();
    for r in records.iter().filter(|r| r.is_valid()) {
        let Some(rel) = &r.map_path else { continue };
        let (nx, ny, values) = read_map(&sweep_dir.join(rel))?;
        let map = AbsorptionMap {
            wavelength_nm: r.wavelength_nm,
            nx,
            ny,
            spacing_um: 1.0,
            values,
        };
        out.push(MapSample {
            input: RawInput::from(r),
            values: map.downsample(grid[0], grid[1])?,
        });
    }
    if out.is_empty() {
        return Err(Error::InvalidArgument(
            "no absorption maps found; run an fdtd sweep first".into(),
        ));
    }
    Ok(out)
}

/// Trains the convolutional decoder on absorption maps.
pub fn train_cnn(
    samples: &[MapSample],
    arch: CnnArchitecture,
    config: &TrainConfig,
) -> Result<(Surrogate, TrainReport)> {
    let arch = Architecture::Cnn(arch);
    let width = arch.outputs();
    if arch.inputs() != FEATURES {
        return Err(Error::InvalidArgument(format!(
            "the CNN takes {FEATURES} features"
        )));
    }
    if let Some(s) = samples.iter().find(|s| s.values.len() != width) {
        return Err(Error::Shape {
            layer: "map target".into(),
            expected: width,
            got: s.values.len(),
        });
    }
    let inputs: Vec<RawInput> = samples.iter().map(|s| s.input).collect();
    let targets: Vec<f64> = samples
        .iter()
        .flat_map(|s| s.values.iter().copied())
        .collect();
    fit_surrogate(
        arch,
        &inputs,
        &targets,
        vec!["absorbed_power_density".into()],
        true,
        config,
    )
}
