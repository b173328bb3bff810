//! Architectures and the sequential network that runs them.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::layers::{BatchNorm, Conv, Dense, Layer, Saved, Shape};
use crate::error::{Error, Result};

/// Dense regressor: hidden blocks of {dense, ReLU, batch norm, dropout}
/// followed by a linear output layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpArchitecture {
    pub inputs: usize,
    pub hidden: Vec<usize>,
    pub outputs: usize,
    pub dropout: f64,
    pub batch_norm: bool,
}

impl Default for MlpArchitecture {
    fn default() -> Self {
        Self {
            inputs: 4,
            hidden: vec![128; 3],
            outputs: 2,
            dropout: 0.2,
            batch_norm: true,
        }
    }
}

/// Decoder: dense expansion to a coarse grid, then one stage of {2×
/// upsample, 3×3 conv, ReLU, batch norm, dropout} per entry of
/// `stage_channels`, then a 3×3 conv to one channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CnnArchitecture {
    pub inputs: usize,
    /// Coarse grid as [width, height, channels].
    pub coarse: [usize; 3],
    pub stage_channels: Vec<usize>,
    pub dropout: f64,
}

impl Default for CnnArchitecture {
    fn default() -> Self {
        Self {
            inputs: 4,
            coarse: [8, 6, 16],
            stage_channels: vec![16, 13, 8],
            dropout: 0.3,
        }
    }
}

impl CnnArchitecture {
    /// Output map as [width, height].
    pub fn output_grid(&self) -> [usize; 2] {
        let f = 1 << self.stage_channels.len();
        [self.coarse[0] * f, self.coarse[1] * f]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Architecture {
    Mlp(MlpArchitecture),
    Cnn(CnnArchitecture),
}

impl Architecture {
    pub fn inputs(&self) -> usize {
        match self {
            Architecture::Mlp(a) => a.inputs,
            Architecture::Cnn(a) => a.inputs,
        }
    }

    pub fn outputs(&self) -> usize {
        match self {
            Architecture::Mlp(a) => a.outputs,
            Architecture::Cnn(a) => {
                let [w, h] = a.output_grid();
                w * h
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_string()));
        let rate_ok = |r: f64| (0.0..1.0).contains(&r);
        match self {
            Architecture::Mlp(a) => {
                if a.inputs == 0 || a.outputs == 0 || a.hidden.iter().any(|&h| h == 0) {
                    return bad("MLP layer widths must be positive");
                }
                if !rate_ok(a.dropout) {
                    return bad("dropout rate must lie in [0, 1)");
                }
            }
            Architecture::Cnn(a) => {
                if a.inputs == 0
                    || a.coarse.iter().any(|&v| v == 0)
                    || a.stage_channels.iter().any(|&c| c == 0)
                {
                    return bad("CNN dimensions must be positive");
                }
                if !rate_ok(a.dropout) {
                    return bad("dropout rate must lie in [0, 1)");
                }
            }
        }
        Ok(())
    }
}

/// Sequential stack of layers with the activations of the last training
/// forward pass kept for backpropagation.
#[derive(Debug, Clone)]
pub struct Network {
    input: Shape,
    layers: Vec<Layer>,
    saved: Option<(usize, Vec<Saved>)>,
}

impl PartialEq for Network {
    fn eq(&self, other: &Self) -> bool {
        let names = |n: &Network| n.layers.iter().map(Layer::name).collect::<Vec<_>>();
        self.input == other.input
            && names(self) == names(other)
            && self.state_vector() == other.state_vector()
    }
}

impl Network {
    /// Checks that consecutive layer shapes chain.
    pub fn new(input: Shape, layers: Vec<Layer>) -> Result<Self> {
        let mut shape = input;
        for (k, layer) in layers.iter().enumerate() {
            if let Some(required) = layer.required_input() {
                if required.len() != shape.len() {
                    return Err(Error::Shape {
                        layer: format!("{} #{k}", layer.name()),
                        expected: required.len(),
                        got: shape.len(),
                    });
                }
            }
            shape = layer.output_shape(shape);
        }
        Ok(Self {
            input,
            layers,
            saved: None,
        })
    }

    /// Builds `arch` with weights drawn from a generator seeded with `seed`.
    pub fn build(arch: &Architecture, seed: u64) -> Result<Self> {
        arch.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        match arch {
            Architecture::Mlp(a) => Self::mlp(a, &mut rng),
            Architecture::Cnn(a) => Self::cnn(a, &mut rng),
        }
    }

    fn mlp(a: &MlpArchitecture, rng: &mut impl Rng) -> Result<Self> {
        let mut layers = Vec::new();
        let mut width = a.inputs;
        for &h in &a.hidden {
            layers.push(Layer::Dense(Dense::new(width, h, rng)));
            layers.push(Layer::Relu);
            if a.batch_norm {
                layers.push(Layer::BatchNorm(BatchNorm::new(Shape::flat(h))));
            }
            if a.dropout > 0.0 {
                layers.push(Layer::Dropout(a.dropout));
            }
            width = h;
        }
        layers.push(Layer::Dense(Dense::new(width, a.outputs, rng)));
        Self::new(Shape::flat(a.inputs), layers)
    }

    fn cnn(a: &CnnArchitecture, rng: &mut impl Rng) -> Result<Self> {
        let [w0, h0, c0] = a.coarse;
        let mut layers = vec![
            Layer::Dense(Dense::new(a.inputs, w0 * h0 * c0, rng)),
            Layer::Relu,
        ];
        let mut shape = Shape {
            c: c0,
            h: h0,
            w: w0,
        };
        for &ch in &a.stage_channels {
            layers.push(Layer::Upsample(shape));
            let (h, w) = (2 * shape.h, 2 * shape.w);
            layers.push(Layer::Conv(Conv::new(shape.c, ch, h, w, rng)));
            layers.push(Layer::Relu);
            shape = Shape { c: ch, h, w };
            layers.push(Layer::BatchNorm(BatchNorm::new(shape)));
            if a.dropout > 0.0 {
                layers.push(Layer::Dropout(a.dropout));
            }
        }
        layers.push(Layer::Conv(Conv::new(shape.c, 1, shape.h, shape.w, rng)));
        Self::new(Shape::flat(a.inputs), layers)
    }

    pub fn input_width(&self) -> usize {
        self.input.len()
    }

    pub fn output_width(&self) -> usize {
        self.layers
            .iter()
            .fold(self.input, |s, l| l.output_shape(s))
            .len()
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    fn check_input(&self, x: &[f64]) -> Result<usize> {
        let width = self.input_width();
        if x.is_empty() || x.len() % width != 0 {
            return Err(Error::Shape {
                layer: "input".into(),
                expected: width,
                got: x.len(),
            });
        }
        Ok(x.len() / width)
    }

    /// Training-mode forward pass: batch statistics, dropout masks from
    /// `rng`, activations kept for [`Network::backward`].
    pub fn forward_train(&mut self, x: &[f64], rng: &mut impl Rng) -> Result<Vec<f64>> {
        let batch = self.check_input(x)?;
        let mut saved = Vec::with_capacity(self.layers.len());
        let mut a = x.to_vec();
        for layer in &mut self.layers {
            let (y, s) = layer.train(a, batch, rng);
            saved.push(s);
            a = y;
        }
        self.saved = Some((batch, saved));
        Ok(a)
    }

    /// Inference-mode forward pass with running statistics and no dropout.
    pub fn predict(&self, x: &[f64]) -> Result<Vec<f64>> {
        let batch = self.check_input(x)?;
        Ok(self
            .layers
            .iter()
            .fold(x.to_vec(), |a, layer| layer.infer(a, batch)))
    }

    /// Gradients of the loss whose output gradient is `grad_out` with respect
    /// to every parameter, from the last training forward pass.
    pub fn backward(&mut self, grad_out: &[f64]) -> Result<Vec<f64>> {
        let (batch, saved) = self
            .saved
            .take()
            .ok_or_else(|| Error::Usage("backward needs a cached training forward pass".into()))?;
        if grad_out.len() != batch * self.output_width() {
            return Err(Error::Shape {
                layer: "output gradient".into(),
                expected: batch * self.output_width(),
                got: grad_out.len(),
            });
        }
        let mut g = grad_out.to_vec();
        for (layer, s) in self.layers.iter_mut().zip(&saved).rev() {
            g = layer.backward(s, g, batch);
        }
        Ok(g)
    }

    /// Trainable tensors paired with their gradients, in layer order.
    pub fn params_mut(&mut self) -> Vec<(&mut Vec<f64>, &Vec<f64>)> {
        self.layers
            .iter_mut()
            .flat_map(|l| l.params_mut())
            .collect()
    }

    pub fn param_count(&self) -> usize {
        self.state().iter().map(|t| t.len()).sum()
    }

    /// Every stored tensor, running statistics included.
    pub fn state(&self) -> Vec<&Vec<f64>> {
        self.layers.iter().flat_map(|l| l.state()).collect()
    }

    pub fn state_mut(&mut self) -> Vec<&mut Vec<f64>> {
        self.layers.iter_mut().flat_map(|l| l.state_mut()).collect()
    }

    /// Flattened copy of [`Network::state`].
    pub fn state_vector(&self) -> Vec<f64> {
        self.state().into_iter().flatten().copied().collect()
    }

    pub fn load_state_vector(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.param_count() {
            return Err(Error::Format(format!(
                "payload holds {} values, architecture needs {}",
                values.len(),
                self.param_count()
            )));
        }
        let mut offset = 0;
        for t in self.state_mut() {
            let n = t.len();
            t.copy_from_slice(&values[offset..offset + n]);
            offset += n;
        }
        Ok(())
    }
}
