//! Mini-batch Adam training with early stopping and plateau learning-rate
//! reduction, plus error metrics.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::network::Network;
use crate::error::{Error, Result};
use crate::format::sci9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub max_epochs: usize,
    pub batch_size: usize,
    /// Epochs without validation improvement before stopping.
    pub early_stopping_patience: usize,
    pub plateau_factor: f64,
    pub plateau_patience: usize,
    pub min_learning_rate: f64,
    /// Partition ratios: (train, test) or (train, validation, test).
    pub split: Vec<f64>,
    pub seed: u64,
}

impl TrainConfig {
    fn base(max_epochs: usize, batch_size: usize, split: Vec<f64>) -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            max_epochs,
            batch_size,
            early_stopping_patience: 15,
            plateau_factor: 0.5,
            plateau_patience: 5,
            min_learning_rate: 1e-5,
            split,
            seed: 42,
        }
    }

    pub fn mlp() -> Self {
        Self::base(500, 32, vec![0.8, 0.2])
    }

    pub fn cnn() -> Self {
        Self::base(200, 64, vec![0.7, 0.15, 0.15])
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_string()));
        if !(self.learning_rate > 0.0) || !(self.min_learning_rate > 0.0) {
            return bad("learning rates must be positive");
        }
        if self.early_stopping_patience == 0 || self.plateau_patience == 0 {
            return bad("patience values must be positive");
        }
        if self.max_epochs == 0 || self.batch_size == 0 {
            return bad("epoch count and batch size must be positive");
        }
        if !(self.plateau_factor > 0.0 && self.plateau_factor < 1.0) {
            return bad("plateau factor must lie in (0, 1)");
        }
        if !(2..=3).contains(&self.split.len()) {
            return bad("split must have two or three ratios");
        }
        Ok(())
    }
}

/// Row-major feature and target matrices in network (scaled) units.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainData {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub inputs: usize,
    pub outputs: usize,
}

impl TrainData {
    pub fn new(x: Vec<f64>, y: Vec<f64>, inputs: usize, outputs: usize) -> Result<Self> {
        if inputs == 0 || outputs == 0 || x.len() % inputs != 0 || y.len() % outputs != 0 {
            return Err(Error::InvalidArgument(
                "feature or target matrix has a ragged row".into(),
            ));
        }
        if x.len() / inputs != y.len() / outputs {
            return Err(Error::InvalidArgument(
                "feature and target row counts differ".into(),
            ));
        }
        Ok(Self {
            x,
            y,
            inputs,
            outputs,
        })
    }

    pub fn len(&self) -> usize {
        self.x.len() / self.inputs
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// Gathers the rows in `idx`.
    pub fn rows(&self, idx: &[usize]) -> (Vec<f64>, Vec<f64>) {
        let mut x = Vec::with_capacity(idx.len() * self.inputs);
        let mut y = Vec::with_capacity(idx.len() * self.outputs);
        for &i in idx {
            x.extend_from_slice(&self.x[i * self.inputs..(i + 1) * self.inputs]);
            y.extend_from_slice(&self.y[i * self.outputs..(i + 1) * self.outputs]);
        }
        (x, y)
    }
}

pub fn mse(prediction: &[f64], target: &[f64]) -> f64 {
    let n = prediction.len() as f64;
    prediction
        .iter()
        .zip(target)
        .map(|(p, t)| (p - t) * (p - t))
        .sum::<f64>()
        / n
}

/// Adam with bias correction.
#[derive(Debug, Clone)]
pub struct Adam {
    pub learning_rate: f64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
    step: i32,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(config: &TrainConfig) -> Self {
        Self {
            learning_rate: config.learning_rate,
            beta1: config.beta1,
            beta2: config.beta2,
            epsilon: config.epsilon,
            step: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn update(&mut self, net: &mut Network) {
        let params = net.params_mut();
        if self.m.is_empty() {
            self.m = params.iter().map(|(p, _)| vec![0.0; p.len()]).collect();
            self.v = self.m.clone();
        }
        self.step += 1;
        let c1 = 1.0 - self.beta1.powi(self.step);
        let c2 = 1.0 - self.beta2.powi(self.step);
        for ((p, g), (m, v)) in params
            .into_iter()
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            for k in 0..p.len() {
                m[k] = self.beta1 * m[k] + (1.0 - self.beta1) * g[k];
                v[k] = self.beta2 * v[k] + (1.0 - self.beta2) * g[k] * g[k];
                p[k] -= self.learning_rate * (m[k] / c1) / ((v[k] / c2).sqrt() + self.epsilon);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub lr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LrEvent {
    pub epoch: usize,
    pub lr: f64,
}

/// Mean absolute and squared error per output column and over all columns,
/// in physical (unscaled) units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub count: usize,
    pub mae: Vec<f64>,
    pub mse: Vec<f64>,
    pub overall_mae: f64,
    pub overall_mse: f64,
}

/// Errors of `prediction` against `target`, both row-major with `width`
/// columns.
pub fn metrics(prediction: &[f64], target: &[f64], width: usize) -> Result<Metrics> {
    if prediction.is_empty() || width == 0 {
        return Err(Error::Evaluation("no records to evaluate".into()));
    }
    if prediction.len() != target.len() || prediction.len() % width != 0 {
        return Err(Error::Evaluation(format!(
            "{} predictions against {} targets of width {width}",
            prediction.len(),
            target.len()
        )));
    }
    let rows = prediction.len() / width;
    let (mut mae, mut mse) = (vec![0.0; width], vec![0.0; width]);
    for (p, t) in prediction.chunks(width).zip(target.chunks(width)) {
        for k in 0..width {
            let d = p[k] - t[k];
            mae[k] += d.abs();
            mse[k] += d * d;
        }
    }
    mae.iter_mut()
        .chain(mse.iter_mut())
        .for_each(|v| *v /= rows as f64);
    let overall_mae = mae.iter().sum::<f64>() / width as f64;
    let overall_mse = mse.iter().sum::<f64>() / width as f64;
    Ok(Metrics {
        count: rows,
        mae,
        mse,
        overall_mae,
        overall_mse,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: Vec<EpochLog>,
    /// Epoch whose weights were restored.
    pub best_epoch: usize,
    pub stopped_epoch: usize,
    pub early_stopped: bool,
    pub lr_events: Vec<LrEvent>,
    pub test: Option<Metrics>,
}

impl TrainReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,train_loss,val_loss,lr\n");
        for e in &self.epochs {
            out.push_str(&format!(
                "{},{},{},{}\n",
                e.epoch,
                sci9(e.train_loss),
                sci9(e.val_loss),
                sci9(e.lr)
            ));
        }
        out
    }
}

/// Trains `net` on the rows `train_idx` of `data`, monitoring the rows
/// `val_idx`. Returns the network with the best validation weights.
pub fn train(
    mut net: Network,
    data: &TrainData,
    train_idx: &[usize],
    val_idx: &[usize],
    config: &TrainConfig,
) -> Result<(Network, TrainReport)> {
    config.validate()?;
    if train_idx.is_empty() || val_idx.is_empty() {
        return Err(Error::Split(
            "training and validation sets must be non-empty".into(),
        ));
    }
    if data.inputs != net.input_width() || data.outputs != net.output_width() {
        return Err(Error::Shape {
            layer: "training data".into(),
            expected: net.input_width(),
            got: data.inputs,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut adam = Adam::new(config);
    let (val_x, val_y) = data.rows(val_idx);
    let mut order = train_idx.to_vec();
    let mut report = TrainReport {
        epochs: Vec::new(),
        best_epoch: 0,
        stopped_epoch: 0,
        early_stopped: false,
        lr_events: Vec::new(),
        test: None,
    };
    let mut best: Option<(f64, Network)> = None;
    let (mut wait, mut plateau_best, mut plateau_wait) = (0, f64::INFINITY, 0);

    for epoch in 1..=config.max_epochs {
        order.shuffle(&mut rng);
        let lr = adam.learning_rate;
        let (mut loss_sum, mut seen) = (0.0, 0usize);
        for (b, chunk) in order.chunks(config.batch_size).enumerate() {
            // a lone trailing sample carries no batch statistics
            if chunk.len() == 1 && order.len() > 1 {
                continue;
            }
            let (x, y) = data.rows(chunk);
            let out = net.forward_train(&x, &mut rng)?;
            let loss = mse(&out, &y);
            if !loss.is_finite() {
                return Err(Error::TrainingDivergence { epoch, batch: b });
            }
            let scale = 2.0 / out.len() as f64;
            let grad: Vec<f64> = out.iter().zip(&y).map(|(o, t)| scale * (o - t)).collect();
            net.backward(&grad)?;
            adam.update(&mut net);
            loss_sum += loss * chunk.len() as f64;
            seen += chunk.len();
        }
        let train_loss = loss_sum / seen as f64;
        let val_loss = mse(&net.predict(&val_x)?, &val_y);
        if !val_loss.is_finite() {
            return Err(Error::TrainingDivergence {
                epoch,
                batch: order.len().div_ceil(config.batch_size),
            });
        }
        report.epochs.push(EpochLog {
            epoch,
            train_loss,
            val_loss,
            lr,
        });
        report.stopped_epoch = epoch;

        if best.as_ref().map_or(true, |(b, _)| val_loss < *b) {
            best = Some((val_loss, net.clone()));
            report.best_epoch = epoch;
            wait = 0;
        } else {
            wait += 1;
        }
        if val_loss < plateau_best {
            plateau_best = val_loss;
            plateau_wait = 0;
        } else {
            plateau_wait += 1;
            if plateau_wait >= config.plateau_patience {
                let reduced =
                    (adam.learning_rate * config.plateau_factor).max(config.min_learning_rate);
                if reduced < adam.learning_rate {
                    adam.learning_rate = reduced;
                    report.lr_events.push(LrEvent { epoch, lr: reduced });
                }
                plateau_wait = 0;
            }
        }
        if wait >= config.early_stopping_patience {
            report.early_stopped = true;
            break;
        }
    }
    let (_, best_net) = best.expect("at least one epoch ran");
    Ok((best_net, report))
}
