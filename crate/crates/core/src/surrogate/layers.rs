//! Layer kernels with hand-written forward and backward passes. Activations
//! are stored sample-major, each sample laid out channel-major `[c][h][w]`.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Per-sample tensor shape. Dense activations use `h = w = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Shape {
    pub c: usize,
    pub h: usize,
    pub w: usize,
}

impl Shape {
    pub fn flat(n: usize) -> Self {
        Self { c: n, h: 1, w: 1 }
    }

    pub fn len(&self) -> usize {
        self.c * self.h * self.w
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn spatial(&self) -> usize {
        self.h * self.w
    }
}

/// Fully connected layer, `w[o * inputs + i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    pub w: Vec<f64>,
    pub b: Vec<f64>,
    pub gw: Vec<f64>,
    pub gb: Vec<f64>,
}

impl Dense {
    pub fn new(inputs: usize, outputs: usize, rng: &mut impl Rng) -> Self {
        let limit = (6.0 / inputs as f64).sqrt();
        let w = (0..inputs * outputs)
            .map(|_| rng.gen_range(-limit..limit))
            .collect();
        Self {
            inputs,
            outputs,
            w,
            b: vec![0.0; outputs],
            gw: vec![0.0; inputs * outputs],
            gb: vec![0.0; outputs],
        }
    }

    fn forward(&self, x: &[f64], batch: usize) -> Vec<f64> {
        let mut y = vec![0.0; batch * self.outputs];
        for (xs, ys) in x
            .chunks(self.inputs)
            .zip(y.chunks_mut(self.outputs))
            .take(batch)
        {
            for (o, yo) in ys.iter_mut().enumerate() {
                let row = &self.w[o * self.inputs..(o + 1) * self.inputs];
                *yo = self.b[o] + row.iter().zip(xs).map(|(a, b)| a * b).sum::<f64>();
            }
        }
        y
    }

    fn backward(&mut self, x: &[f64], g: &[f64], batch: usize) -> Vec<f64> {
        self.gw.iter_mut().for_each(|v| *v = 0.0);
        self.gb.iter_mut().for_each(|v| *v = 0.0);
        let mut gx = vec![0.0; batch * self.inputs];
        for s in 0..batch {
            let xs = &x[s * self.inputs..(s + 1) * self.inputs];
            let gs = &g[s * self.outputs..(s + 1) * self.outputs];
            let gxs = &mut gx[s * self.inputs..(s + 1) * self.inputs];
            for (o, &go) in gs.iter().enumerate() {
                self.gb[o] += go;
                let range = o * self.inputs..(o + 1) * self.inputs;
                for ((gw, w), (xi, gxi)) in self.gw[range.clone()]
                    .iter_mut()
                    .zip(&self.w[range])
                    .zip(xs.iter().zip(gxs.iter_mut()))
                {
                    *gw += go * xi;
                    *gxi += go * w;
                }
            }
        }
        gx
    }
}

/// Batch normalization per channel over batch and spatial positions.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchNorm {
    pub shape: Shape,
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
    pub ggamma: Vec<f64>,
    pub gbeta: Vec<f64>,
    pub momentum: f64,
    pub eps: f64,
}

pub const BN_MOMENTUM: f64 = 0.9;
pub const BN_EPS: f64 = 1e-5;

impl BatchNorm {
    pub fn new(shape: Shape) -> Self {
        let c = shape.c;
        Self {
            shape,
            gamma: vec![1.0; c],
            beta: vec![0.0; c],
            running_mean: vec![0.0; c],
            running_var: vec![1.0; c],
            ggamma: vec![0.0; c],
            gbeta: vec![0.0; c],
            momentum: BN_MOMENTUM,
            eps: BN_EPS,
        }
    }

    fn infer(&self, x: &[f64], batch: usize) -> Vec<f64> {
        let (c_n, hw, len) = (self.shape.c, self.shape.spatial(), self.shape.len());
        let mut y = vec![0.0; x.len()];
        for c in 0..c_n {
            let inv = 1.0 / (self.running_var[c] + self.eps).sqrt();
            let (m, g, b) = (self.running_mean[c], self.gamma[c], self.beta[c]);
            for s in 0..batch {
                let base = s * len + c * hw;
                for k in base..base + hw {
                    y[k] = g * (x[k] - m) * inv + b;
                }
            }
        }
        y
    }

    /// Normalizes with batch statistics, updates the running statistics and
    /// returns (output, x̂, 1/σ).
    fn train(&mut self, x: &[f64], batch: usize) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let (c_n, hw, len) = (self.shape.c, self.shape.spatial(), self.shape.len());
        let n = (batch * hw) as f64;
        let mut y = vec![0.0; x.len()];
        let mut xhat = vec![0.0; x.len()];
        let mut inv_std = vec![0.0; c_n];
        for c in 0..c_n {
            let mut sum = 0.0;
            for s in 0..batch {
                let base = s * len + c * hw;
                sum += x[base..base + hw].iter().sum::<f64>();
            }
            let mean = sum / n;
            let mut sq = 0.0;
            for s in 0..batch {
                let base = s * len + c * hw;
                sq += x[base..base + hw]
                    .iter()
                    .map(|v| (v - mean) * (v - mean))
                    .sum::<f64>();
            }
            let var = sq / n;
            let inv = 1.0 / (var + self.eps).sqrt();
            inv_std[c] = inv;
            for s in 0..batch {
                let base = s * len + c * hw;
                for k in base..base + hw {
                    xhat[k] = (x[k] - mean) * inv;
                    y[k] = self.gamma[c] * xhat[k] + self.beta[c];
                }
            }
            self.running_mean[c] =
                self.momentum * self.running_mean[c] + (1.0 - self.momentum) * mean;
            self.running_var[c] = self.momentum * self.running_var[c] + (1.0 - self.momentum) * var;
        }
        (y, xhat, inv_std)
    }

    fn backward(&mut self, xhat: &[f64], inv_std: &[f64], g: &[f64], batch: usize) -> Vec<f64> {
        let (c_n, hw, len) = (self.shape.c, self.shape.spatial(), self.shape.len());
        let n = (batch * hw) as f64;
        let mut gx = vec![0.0; g.len()];
        for c in 0..c_n {
            let (mut dg, mut db) = (0.0, 0.0);
            for s in 0..batch {
                let base = s * len + c * hw;
                for k in base..base + hw {
                    dg += g[k] * xhat[k];
                    db += g[k];
                }
            }
            self.ggamma[c] = dg;
            self.gbeta[c] = db;
            let scale = self.gamma[c] * inv_std[c] / n;
            for s in 0..batch {
                let base = s * len + c * hw;
                for k in base..base + hw {
                    gx[k] = scale * (n * g[k] - db - xhat[k] * dg);
                }
            }
        }
        gx
    }
}

/// Inverted dropout: kept activations are scaled by 1/(1 − rate) in training.
fn dropout_mask(rate: f64, n: usize, rng: &mut impl Rng) -> Vec<f64> {
    let keep = 1.0 / (1.0 - rate);
    (0..n)
        .map(|_| if rng.gen::<f64>() < rate { 0.0 } else { keep })
        .collect()
}

/// Strided view of a dense matrix: `data[r * row_stride + c * col_stride]`.
#[derive(Clone, Copy)]
struct Mat<'a> {
    data: &'a [f64],
    row_stride: usize,
    col_stride: usize,
}

impl<'a> Mat<'a> {
    fn new(data: &'a [f64], row_stride: usize, col_stride: usize) -> Self {
        Self {
            data,
            row_stride,
            col_stride,
        }
    }

    fn span(&self, rows: usize, cols: usize) -> usize {
        span(rows, cols, self.row_stride, self.col_stride)
    }
}

fn span(rows: usize, cols: usize, row_stride: usize, col_stride: usize) -> usize {
    (rows - 1) * row_stride + (cols - 1) * col_stride + 1
}

/// `c = a·b + beta·c` for an `m × k` view `a`, a `k × n` view `b` and an
/// `m × n` output with strides `(c_rs, c_cs)`.
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: Mat,
    b: Mat,
    beta: f64,
    c: &mut [f64],
    c_rs: usize,
    c_cs: usize,
) {
    if m == 0 || k == 0 || n == 0 {
        return;
    }
    assert!(a.data.len() >= a.span(m, k) && b.data.len() >= b.span(k, n));
    assert!(c.len() >= span(m, n, c_rs, c_cs));
    // SAFETY: the assertions above keep every index the kernel touches
    // inside the three slices, and `c` is borrowed mutably and exclusively.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.data.as_ptr(),
            a.row_stride as isize,
            a.col_stride as isize,
            b.data.as_ptr(),
            b.row_stride as isize,
            b.col_stride as isize,
            beta,
            c.as_mut_ptr(),
            c_rs as isize,
            c_cs as isize,
        );
    }
}

/// 3×3 convolution, stride 1, zero padding 1. `w[((co * cin + ci) * 3 + ky) * 3 + kx]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv {
    pub cin: usize,
    pub cout: usize,
    pub h: usize,
    pub w_px: usize,
    pub w: Vec<f64>,
    pub b: Vec<f64>,
    pub gw: Vec<f64>,
    pub gb: Vec<f64>,
}

impl Conv {
    pub fn new(cin: usize, cout: usize, h: usize, w_px: usize, rng: &mut impl Rng) -> Self {
        let limit = (6.0 / (cin * 9) as f64).sqrt();
        let n = cout * cin * 9;
        Self {
            cin,
            cout,
            h,
            w_px,
            w: (0..n).map(|_| rng.gen_range(-limit..limit)).collect(),
            b: vec![0.0; cout],
            gw: vec![0.0; n],
            gb: vec![0.0; cout],
        }
    }

    /// Row length of the zero-padded planes.
    fn pitch(&self) -> usize {
        self.w_px + 2
    }

    /// Size of one zero-padded `(h + 2) × (w + 2)` plane.
    fn plane(&self) -> usize {
        (self.h + 2) * self.pitch()
    }

    /// Output positions computed per channel. Position `q = y·pitch + x`
    /// is pixel `(y, x)` for `x < w`; the two columns past the edge are
    /// computed and discarded, and the last row stops before them so every
    /// tap stays inside the padded plane.
    fn span_len(&self) -> usize {
        self.h * self.pitch() - 2
    }

    /// Offset of tap `(ky, kx)` in a padded plane relative to `q`.
    fn tap(&self, t: usize) -> usize {
        (t / 3) * self.pitch() + t % 3
    }

    fn pad(&self, x: &[f64]) -> Vec<f64> {
        let (h, w, pitch, plane) = (self.h, self.w_px, self.pitch(), self.plane());
        let mut padded = vec![0.0; self.cin * plane];
        for (src, dst) in x.chunks(h * w).zip(padded.chunks_mut(plane)) {
            for y in 0..h {
                dst[(y + 1) * pitch + 1..][..w].copy_from_slice(&src[y * w..(y + 1) * w]);
            }
        }
        padded
    }

    /// Weights of tap `t` as a `cout × cin` view.
    fn tap_weights(&self, t: usize) -> Mat<'_> {
        Mat::new(&self.w[t..], self.cin * 9, 9)
    }

    fn forward_sample(&self, x: &[f64], y: &mut [f64]) {
        let (h, w, pitch, n) = (self.h, self.w_px, self.pitch(), self.span_len());
        let stride = h * pitch;
        let xp = self.pad(x);
        let mut acc = vec![0.0; self.cout * stride];
        for (co, row) in acc.chunks_mut(stride).enumerate() {
            row.iter_mut().for_each(|v| *v = self.b[co]);
        }
        for t in 0..9 {
            let b = Mat::new(&xp[self.tap(t)..], self.plane(), 1);
            gemm(
                self.cout,
                self.cin,
                n,
                self.tap_weights(t),
                b,
                1.0,
                &mut acc,
                stride,
                1,
            );
        }
        for (src, dst) in acc.chunks(stride).zip(y.chunks_mut(h * w)) {
            for yy in 0..h {
                dst[yy * w..(yy + 1) * w].copy_from_slice(&src[yy * pitch..yy * pitch + w]);
            }
        }
    }

    /// Input gradient of one sample plus its weight and bias gradients.
    fn backward_sample(&self, x: &[f64], g: &[f64], gx: &mut [f64]) -> (Vec<f64>, Vec<f64>) {
        let (h, w, pitch, plane, n) = (
            self.h,
            self.w_px,
            self.pitch(),
            self.plane(),
            self.span_len(),
        );
        let stride = h * pitch;
        let gb = g.chunks(h * w).map(|c| c.iter().sum()).collect();
        // output gradient on the padded row layout, zero in the discarded columns
        let mut gp = vec![0.0; self.cout * stride];
        for (src, dst) in g.chunks(h * w).zip(gp.chunks_mut(stride)) {
            for yy in 0..h {
                dst[yy * pitch..yy * pitch + w].copy_from_slice(&src[yy * w..(yy + 1) * w]);
            }
        }
        let xp = self.pad(x);
        let mut gw = vec![0.0; self.w.len()];
        let mut gxp = vec![0.0; self.cin * plane];
        let g_view = Mat::new(&gp, stride, 1);
        for t in 0..9 {
            let off = self.tap(t);
            let xt = Mat::new(&xp[off..], 1, plane);
            gemm(
                self.cout,
                n,
                self.cin,
                g_view,
                xt,
                0.0,
                &mut gw[t..],
                self.cin * 9,
                9,
            );
            let wt = Mat::new(&self.w[t..], 9, self.cin * 9);
            gemm(
                self.cin,
                self.cout,
                n,
                wt,
                g_view,
                1.0,
                &mut gxp[off..],
                plane,
                1,
            );
        }
        for (src, dst) in gxp.chunks(plane).zip(gx.chunks_mut(h * w)) {
            for yy in 0..h {
                dst[yy * w..(yy + 1) * w].copy_from_slice(&src[(yy + 1) * pitch + 1..][..w]);
            }
        }
        (gw, gb)
    }

    fn forward(&self, x: &[f64], batch: usize) -> Vec<f64> {
        let (ilen, olen) = (
            self.cin * self.h * self.w_px,
            self.cout * self.h * self.w_px,
        );
        let mut y = vec![0.0; batch * olen];
        y.par_chunks_mut(olen)
            .zip(x.par_chunks(ilen))
            .for_each(|(ys, xs)| self.forward_sample(xs, ys));
        y
    }

    fn backward(&mut self, x: &[f64], g: &[f64], batch: usize) -> Vec<f64> {
        let (ilen, olen) = (
            self.cin * self.h * self.w_px,
            self.cout * self.h * self.w_px,
        );
        let mut gx = vec![0.0; batch * ilen];
        let partial: Vec<(Vec<f64>, Vec<f64>)> = gx
            .par_chunks_mut(ilen)
            .zip(x.par_chunks(ilen).zip(g.par_chunks(olen)))
            .map(|(gxs, (xs, gs))| self.backward_sample(xs, gs, gxs))
            .collect();
        // fixed summation order keeps gradients independent of thread count
        self.gw.iter_mut().for_each(|v| *v = 0.0);
        self.gb.iter_mut().for_each(|v| *v = 0.0);
        for (gw, gb) in partial {
            self.gw.iter_mut().zip(gw).for_each(|(a, b)| *a += b);
            self.gb.iter_mut().zip(gb).for_each(|(a, b)| *a += b);
        }
        gx
    }
}

fn upsample(s: Shape, x: &[f64], batch: usize) -> Vec<f64> {
    let (c_n, h, w) = (s.c, s.h, s.w);
    let mut y = vec![0.0; batch * c_n * 4 * h * w];
    for (xs, ys) in x.chunks(c_n * h * w).zip(y.chunks_mut(c_n * 4 * h * w)) {
        for c in 0..c_n {
            for yy in 0..2 * h {
                for xx in 0..2 * w {
                    ys[(c * 2 * h + yy) * 2 * w + xx] = xs[(c * h + yy / 2) * w + xx / 2];
                }
            }
        }
    }
    y
}

/// One network stage.
#[derive(Debug, Clone, PartialEq)]
pub enum Layer {
    Dense(Dense),
    Relu,
    BatchNorm(BatchNorm),
    Dropout(f64),
    /// Nearest-neighbour 2× upsampling of an input of the given shape.
    Upsample(Shape),
    Conv(Conv),
}

/// Values saved by a training-mode forward pass for the backward pass.
#[derive(Debug, Clone)]
pub(crate) enum Saved {
    Input(Vec<f64>),
    Norm { xhat: Vec<f64>, inv_std: Vec<f64> },
    Mask(Vec<f64>),
    Nothing,
}

impl Layer {
    pub fn name(&self) -> &'static str {
        match self {
            Layer::Dense(_) => "dense",
            Layer::Relu => "relu",
            Layer::BatchNorm(_) => "batch_norm",
            Layer::Dropout(_) => "dropout",
            Layer::Upsample(_) => "upsample",
            Layer::Conv(_) => "conv3x3",
        }
    }

    pub fn output_shape(&self, input: Shape) -> Shape {
        match self {
            Layer::Dense(d) => Shape::flat(d.outputs),
            Layer::Upsample(s) => Shape {
                c: s.c,
                h: 2 * s.h,
                w: 2 * s.w,
            },
            Layer::Conv(c) => Shape {
                c: c.cout,
                h: c.h,
                w: c.w_px,
            },
            _ => input,
        }
    }

    /// Input shape this layer requires, when it has one.
    pub fn required_input(&self) -> Option<Shape> {
        match self {
            Layer::Dense(d) => Some(Shape::flat(d.inputs)),
            Layer::BatchNorm(b) => Some(b.shape),
            Layer::Upsample(s) => Some(*s),
            Layer::Conv(c) => Some(Shape {
                c: c.cin,
                h: c.h,
                w: c.w_px,
            }),
            _ => None,
        }
    }

    /// Inference-mode forward pass: running statistics, no dropout.
    pub(crate) fn infer(&self, x: Vec<f64>, batch: usize) -> Vec<f64> {
        match self {
            Layer::Dense(d) => d.forward(&x, batch),
            Layer::Conv(c) => c.forward(&x, batch),
            Layer::Relu => x.iter().map(|v| v.max(0.0)).collect(),
            Layer::BatchNorm(b) => b.infer(&x, batch),
            Layer::Dropout(_) => x,
            Layer::Upsample(s) => upsample(*s, &x, batch),
        }
    }

    /// Training-mode forward pass returning what the backward pass needs.
    pub(crate) fn train(
        &mut self,
        x: Vec<f64>,
        batch: usize,
        rng: &mut impl Rng,
    ) -> (Vec<f64>, Saved) {
        match self {
            Layer::Dense(d) => (d.forward(&x, batch), Saved::Input(x)),
            Layer::Conv(c) => (c.forward(&x, batch), Saved::Input(x)),
            Layer::Relu => (x.iter().map(|v| v.max(0.0)).collect(), Saved::Input(x)),
            Layer::BatchNorm(b) => {
                let (y, xhat, inv_std) = b.train(&x, batch);
                (y, Saved::Norm { xhat, inv_std })
            }
            Layer::Dropout(rate) => {
                if *rate == 0.0 {
                    return (x, Saved::Nothing);
                }
                let mask = dropout_mask(*rate, x.len(), rng);
                let y = x.iter().zip(&mask).map(|(a, m)| a * m).collect();
                (y, Saved::Mask(mask))
            }
            Layer::Upsample(s) => (upsample(*s, &x, batch), Saved::Nothing),
        }
    }

    /// Backward pass from the output gradient; fills parameter gradients and
    /// returns the input gradient.
    pub(crate) fn backward(&mut self, saved: &Saved, g: Vec<f64>, batch: usize) -> Vec<f64> {
        match (self, saved) {
            (Layer::Dense(d), Saved::Input(x)) => d.backward(x, &g, batch),
            (Layer::Conv(c), Saved::Input(x)) => c.backward(x, &g, batch),
            (Layer::Relu, Saved::Input(x)) => g
                .iter()
                .zip(x)
                .map(|(gv, xv)| if *xv > 0.0 { *gv } else { 0.0 })
                .collect(),
            (Layer::BatchNorm(b), Saved::Norm { xhat, inv_std }) => {
                b.backward(xhat, inv_std, &g, batch)
            }
            (Layer::Dropout(_), Saved::Mask(m)) => g.iter().zip(m).map(|(a, b)| a * b).collect(),
            (Layer::Dropout(_), Saved::Nothing) => g,
            (Layer::Upsample(s), Saved::Nothing) => {
                let (c_n, h, w) = (s.c, s.h, s.w);
                let mut gx = vec![0.0; batch * c_n * h * w];
                for (gs, gxs) in g.chunks(c_n * 4 * h * w).zip(gx.chunks_mut(c_n * h * w)) {
                    for c in 0..c_n {
                        for yy in 0..2 * h {
                            for xx in 0..2 * w {
                                gxs[(c * h + yy / 2) * w + xx / 2] +=
                                    gs[(c * 2 * h + yy) * 2 * w + xx];
                            }
                        }
                    }
                }
                gx
            }
            (layer, _) => unreachable!("{} layer received mismatched saved state", layer.name()),
        }
    }

    /// Trainable tensors with their gradients.
    pub fn params_mut(&mut self) -> Vec<(&mut Vec<f64>, &Vec<f64>)> {
        match self {
            Layer::Dense(d) => vec![(&mut d.w, &d.gw), (&mut d.b, &d.gb)],
            Layer::Conv(c) => vec![(&mut c.w, &c.gw), (&mut c.b, &c.gb)],
            Layer::BatchNorm(b) => vec![(&mut b.gamma, &b.ggamma), (&mut b.beta, &b.gbeta)],
            _ => Vec::new(),
        }
    }

    /// Every stored tensor in serialization order, running statistics included.
    pub fn state(&self) -> Vec<&Vec<f64>> {
        match self {
            Layer::Dense(d) => vec![&d.w, &d.b],
            Layer::Conv(c) => vec![&c.w, &c.b],
            Layer::BatchNorm(b) => vec![&b.gamma, &b.beta, &b.running_mean, &b.running_var],
            _ => Vec::new(),
        }
    }

    pub fn state_mut(&mut self) -> Vec<&mut Vec<f64>> {
        match self {
            Layer::Dense(d) => vec![&mut d.w, &mut d.b],
            Layer::Conv(c) => vec![&mut c.w, &mut c.b],
            Layer::BatchNorm(b) => vec![
                &mut b.gamma,
                &mut b.beta,
                &mut b.running_mean,
                &mut b.running_var,
            ],
            _ => Vec::new(),
        }
    }
}
