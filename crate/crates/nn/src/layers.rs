//! Layer descriptors and their runtime implementations.
//!
//! Activations are batched tensors: `[batch, features]` for dense layers and
//! `[batch, height, width, channels]` for spatial ones.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::gemm::gemm;
use crate::{NnError, Param, Result, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Padding {
    /// Zero fill so that the output extent is `ceil(input / stride)`.
    Same,
    /// No padding; output extent `(input - kernel) / stride + 1`.
    Valid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LayerSpec {
    Dense {
        units: usize,
    },
    Conv2d {
        filters: usize,
        kernel: usize,
        stride: usize,
        padding: Padding,
    },
    MaxPool {
        size: usize,
        stride: usize,
    },
    Relu,
    Dropout {
        rate: f64,
    },
    /// Collapse `[h, w, c]` into a vector. `expect` pins the flattened width
    /// so that a spec written as `FC(3136)` fails validation if the spatial
    /// arithmetic upstream does not produce exactly that many values.
    Flatten {
        #[serde(default)]
        expect: Option<usize>,
    },
}

fn conv_extent(input: usize, kernel: usize, stride: usize, padding: Padding) -> Option<usize> {
    match padding {
        Padding::Same => Some(input.div_ceil(stride)),
        Padding::Valid => (input >= kernel).then(|| (input - kernel) / stride + 1),
    }
}

impl LayerSpec {
    /// Per-sample output shape for a per-sample input shape.
    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        let err = |msg: String| Err(NnError::ShapeMismatch(msg));
        match *self {
            LayerSpec::Dense { units } => {
                if units == 0 {
                    return err("dense layer with zero units".into());
                }
                if input.len() != 1 {
                    return err(format!("dense layer needs a flat input, got {input:?}"));
                }
                Ok(vec![units])
            }
            LayerSpec::Conv2d { filters, kernel, stride, padding } => {
                if filters == 0 || kernel == 0 || stride == 0 {
                    return err(format!("conv2d with zero filters/kernel/stride: {self:?}"));
                }
                let &[h, w, _c] = input else {
                    return err(format!("conv2d needs [h, w, c] input, got {input:?}"));
                };
                let (Some(ho), Some(wo)) = (conv_extent(h, kernel, stride, padding), conv_extent(w, kernel, stride, padding))
                else {
                    return err(format!("conv2d kernel {kernel} exceeds input {h}x{w} with valid padding"));
                };
                Ok(vec![ho, wo, filters])
            }
            LayerSpec::MaxPool { size, stride } => {
                if size == 0 || stride == 0 {
                    return err("max-pool with zero size or stride".into());
                }
                let &[h, w, c] = input else {
                    return err(format!("max-pool needs [h, w, c] input, got {input:?}"));
                };
                if h < size || w < size {
                    return err(format!("max-pool window {size} exceeds input {h}x{w}"));
                }
                Ok(vec![(h - size) / stride + 1, (w - size) / stride + 1, c])
            }
            LayerSpec::Relu => Ok(input.to_vec()),
            LayerSpec::Dropout { rate } => {
                if !(0.0..=1.0).contains(&rate) {
                    return err(format!("dropout rate {rate} outside [0, 1]"));
                }
                Ok(input.to_vec())
            }
            LayerSpec::Flatten { expect } => {
                let n = input.iter().product();
                match expect {
                    Some(e) if e != n => err(format!("flatten of {input:?} yields {n} values, spec declares {e}")),
                    _ => Ok(vec![n]),
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum InitScheme {
    /// Zero-mean normal with a fixed standard deviation.
    Normal { std: f64 },
    /// Glorot normal, `std = sqrt(2 / (fan_in + fan_out))`.
    Xavier,
}

impl InitScheme {
    pub(crate) fn sample(&self, shape: Vec<usize>, fan_in: usize, fan_out: usize, rng: &mut ChaCha8Rng) -> Tensor {
        let std = match *self {
            InitScheme::Normal { std } => std,
            InitScheme::Xavier => (2.0 / (fan_in + fan_out) as f64).sqrt(),
        };
        let n: usize = shape.iter().product();
        let data = if std > 0.0 {
            let normal = Normal::new(0.0, std).expect("finite std");
            (0..n).map(|_| normal.sample(rng)).collect()
        } else {
            vec![0.0; n]
        };
        Tensor::from_parts(shape, data)
    }
}

/// How the `rate` of a dropout layer is read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropoutSemantics {
    /// `rate` is the probability of keeping a unit.
    #[default]
    Keep,
    /// `rate` is the probability of zeroing a unit.
    Drop,
}

pub struct ForwardCtx<'a> {
    pub training: bool,
    pub rng: &'a mut ChaCha8Rng,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Dense {
    pub weight: Param,
    pub bias: Param,
    in_features: usize,
    out_features: usize,
    #[serde(skip)]
    input: Vec<f64>,
    #[serde(skip)]
    batch: usize,
}

impl Dense {
    pub fn new(in_features: usize, out_features: usize, init: InitScheme, rng: &mut ChaCha8Rng) -> Self {
        let w = init.sample(vec![out_features, in_features], in_features, out_features, rng);
        Self {
            weight: Param::new(w, true),
            bias: Param::new(Tensor::zeros(vec![out_features]), false),
            in_features,
            out_features,
            input: Vec::new(),
            batch: 0,
        }
    }

    fn forward(&mut self, x: &Tensor) -> Result<Tensor> {
        if x.sample_len() != self.in_features {
            return Err(NnError::ShapeMismatch(format!("dense expects {} inputs, got {:?}", self.in_features, x.shape())));
        }
        let b = x.batch();
        let mut out = vec![0.0; b * self.out_features];
        gemm(b, self.in_features, self.out_features, x.data(), false, self.weight.value.data(), true, 0.0, &mut out);
        let bias = self.bias.value.data();
        for row in out.chunks_mut(self.out_features) {
            for (o, bv) in row.iter_mut().zip(bias) {
                *o += bv;
            }
        }
        self.input.clear();
        self.input.extend_from_slice(x.data());
        self.batch = b;
        Ok(Tensor::from_parts(vec![b, self.out_features], out))
    }

    fn backward(&mut self, g: &Tensor, need_input_grad: bool) -> Option<Tensor> {
        let (b, n_in, n_out) = (self.batch, self.in_features, self.out_features);
        gemm(n_out, b, n_in, g.data(), true, &self.input, false, 1.0, self.weight.grad_mut());
        let db = self.bias.grad_mut();
        for row in g.data().chunks(n_out) {
            for (d, gv) in db.iter_mut().zip(row) {
                *d += gv;
            }
        }
        need_input_grad.then(|| {
            let mut dx = vec![0.0; b * n_in];
            gemm(b, n_out, n_in, g.data(), false, self.weight.value.data(), false, 0.0, &mut dx);
            Tensor::from_parts(vec![b, n_in], dx)
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Conv2d {
    /// `[kernel, kernel, in_channels, filters]`.
    pub filters: Param,
    pub bias: Param,
    kernel: usize,
    stride: usize,
    in_shape: [usize; 3],
    out_hw: [usize; 2],
    pad: [usize; 2],
    #[serde(skip)]
    cols: Vec<f64>,
    #[serde(skip)]
    batch: usize,
}

impl Conv2d {
    pub fn new(
        in_shape: [usize; 3],
        filters: usize,
        kernel: usize,
        stride: usize,
        padding: Padding,
        init: InitScheme,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        let [h, w, c] = in_shape;
        let out = LayerSpec::Conv2d { filters, kernel, stride, padding }.output_shape(&in_shape)?;
        let (ho, wo) = (out[0], out[1]);
        let pad = match padding {
            Padding::Same => {
                [((ho - 1) * stride + kernel).saturating_sub(h) / 2, ((wo - 1) * stride + kernel).saturating_sub(w) / 2]
            }
            Padding::Valid => [0, 0],
        };
        let fan_in = kernel * kernel * c;
        let f = init.sample(vec![kernel, kernel, c, filters], fan_in, kernel * kernel * filters, rng);
        Ok(Self {
            filters: Param::new(f, true),
            bias: Param::new(Tensor::zeros(vec![filters]), false),
            kernel,
            stride,
            in_shape,
            out_hw: [ho, wo],
            pad,
            cols: Vec::new(),
            batch: 0,
        })
    }

    fn patch_len(&self) -> usize {
        self.kernel * self.kernel * self.in_shape[2]
    }

    fn n_filters(&self) -> usize {
        self.filters.value.shape()[3]
    }

    fn im2col(&self, x: &[f64], batch: usize, cols: &mut Vec<f64>) {
        let [h, w, c] = self.in_shape;
        let [ho, wo] = self.out_hw;
        let k = self.kernel;
        let kk = self.patch_len();
        cols.clear();
        cols.resize(batch * ho * wo * kk, 0.0);
        for bi in 0..batch {
            let img = &x[bi * h * w * c..(bi + 1) * h * w * c];
            for oy in 0..ho {
                for ox in 0..wo {
                    let row = ((bi * ho + oy) * wo + ox) * kk;
                    for ky in 0..k {
                        let iy = (oy * self.stride + ky) as isize - self.pad[0] as isize;
                        if iy < 0 || iy >= h as isize {
                            continue;
                        }
                        for kx in 0..k {
                            let ix = (ox * self.stride + kx) as isize - self.pad[1] as isize;
                            if ix < 0 || ix >= w as isize {
                                continue;
                            }
                            let src = (iy as usize * w + ix as usize) * c;
                            let dst = row + (ky * k + kx) * c;
                            cols[dst..dst + c].copy_from_slice(&img[src..src + c]);
                        }
                    }
                }
            }
        }
    }

    fn col2im(&self, dcols: &[f64], batch: usize) -> Vec<f64> {
        let [h, w, c] = self.in_shape;
        let [ho, wo] = self.out_hw;
        let k = self.kernel;
        let kk = self.patch_len();
        let mut dx = vec![0.0; batch * h * w * c];
        for bi in 0..batch {
            let img = &mut dx[bi * h * w * c..(bi + 1) * h * w * c];
            for oy in 0..ho {
                for ox in 0..wo {
                    let row = ((bi * ho + oy) * wo + ox) * kk;
                    for ky in 0..k {
                        let iy = (oy * self.stride + ky) as isize - self.pad[0] as isize;
                        if iy < 0 || iy >= h as isize {
                            continue;
                        }
                        for kx in 0..k {
                            let ix = (ox * self.stride + kx) as isize - self.pad[1] as isize;
                            if ix < 0 || ix >= w as isize {
                                continue;
                            }
                            let dst = (iy as usize * w + ix as usize) * c;
                            let src = row + (ky * k + kx) * c;
                            for (d, s) in img[dst..dst + c].iter_mut().zip(&dcols[src..src + c]) {
                                *d += s;
                            }
                        }
                    }
                }
            }
        }
        dx
    }

    fn forward(&mut self, x: &Tensor) -> Result<Tensor> {
        if x.shape()[1..] != self.in_shape {
            return Err(NnError::ShapeMismatch(format!("conv2d expects {:?} per sample, got {:?}", self.in_shape, x.shape())));
        }
        let b = x.batch();
        let mut cols = std::mem::take(&mut self.cols);
        self.im2col(x.data(), b, &mut cols);
        let [ho, wo] = self.out_hw;
        let (rows, kk, nf) = (b * ho * wo, self.patch_len(), self.n_filters());
        let mut out = vec![0.0; rows * nf];
        gemm(rows, kk, nf, &cols, false, self.filters.value.data(), false, 0.0, &mut out);
        let bias = self.bias.value.data();
        for row in out.chunks_mut(nf) {
            for (o, bv) in row.iter_mut().zip(bias) {
                *o += bv;
            }
        }
        self.cols = cols;
        self.batch = b;
        Ok(Tensor::from_parts(vec![b, ho, wo, nf], out))
    }

    fn backward(&mut self, g: &Tensor, need_input_grad: bool) -> Option<Tensor> {
        let b = self.batch;
        let [ho, wo] = self.out_hw;
        let (rows, kk, nf) = (b * ho * wo, self.patch_len(), self.n_filters());
        gemm(kk, rows, nf, &self.cols, true, g.data(), false, 1.0, self.filters.grad_mut());
        let db = self.bias.grad_mut();
        for row in g.data().chunks(nf) {
            for (d, gv) in db.iter_mut().zip(row) {
                *d += gv;
            }
        }
        need_input_grad.then(|| {
            let mut dcols = vec![0.0; rows * kk];
            gemm(rows, nf, kk, g.data(), false, self.filters.value.data(), true, 0.0, &mut dcols);
            let dx = self.col2im(&dcols, b);
            let mut shape = vec![b];
            shape.extend_from_slice(&self.in_shape);
            Tensor::from_parts(shape, dx)
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MaxPool {
    size: usize,
    stride: usize,
    in_shape: [usize; 3],
    out_hw: [usize; 2],
    #[serde(skip)]
    argmax: Vec<usize>,
    #[serde(skip)]
    batch: usize,
}

impl MaxPool {
    pub fn new(in_shape: [usize; 3], size: usize, stride: usize) -> Result<Self> {
        let out = LayerSpec::MaxPool { size, stride }.output_shape(&in_shape)?;
        Ok(Self { size, stride, in_shape, out_hw: [out[0], out[1]], argmax: Vec::new(), batch: 0 })
    }

    fn forward(&mut self, x: &Tensor) -> Result<Tensor> {
        if x.shape()[1..] != self.in_shape {
            return Err(NnError::ShapeMismatch(format!("max-pool expects {:?} per sample, got {:?}", self.in_shape, x.shape())));
        }
        let [h, w, c] = self.in_shape;
        let [ho, wo] = self.out_hw;
        let b = x.batch();
        let xd = x.data();
        let mut out = Vec::with_capacity(b * ho * wo * c);
        self.argmax.clear();
        for bi in 0..b {
            let base = bi * h * w * c;
            for oy in 0..ho {
                for ox in 0..wo {
                    for ch in 0..c {
                        // Row-major scan with strict comparison: ties go to
                        // the first cell.
                        let mut best_idx = base + ((oy * self.stride) * w + ox * self.stride) * c + ch;
                        let mut best = xd[best_idx];
                        for ky in 0..self.size {
                            for kx in 0..self.size {
                                let idx = base + ((oy * self.stride + ky) * w + ox * self.stride + kx) * c + ch;
                                if xd[idx] > best {
                                    best = xd[idx];
                                    best_idx = idx;
                                }
                            }
                        }
                        out.push(best);
                        self.argmax.push(best_idx);
                    }
                }
            }
        }
        self.batch = b;
        Ok(Tensor::from_parts(vec![b, ho, wo, c], out))
    }

    fn backward(&mut self, g: &Tensor) -> Tensor {
        let [h, w, c] = self.in_shape;
        let mut dx = vec![0.0; self.batch * h * w * c];
        for (&idx, gv) in self.argmax.iter().zip(g.data()) {
            dx[idx] += gv;
        }
        let mut shape = vec![self.batch];
        shape.extend_from_slice(&self.in_shape);
        Tensor::from_parts(shape, dx)
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Relu {
    #[serde(skip)]
    active: Vec<bool>,
}

impl Relu {
    fn forward(&mut self, x: &Tensor) -> Tensor {
        self.active = x.data().iter().map(|&v| v > 0.0).collect();
        let data = x.data().iter().map(|&v| v.max(0.0)).collect();
        Tensor::from_parts(x.shape().to_vec(), data)
    }

    fn backward(&self, g: &Tensor) -> Tensor {
        let data = g.data().iter().zip(&self.active).map(|(&gv, &a)| if a { gv } else { 0.0 }).collect();
        Tensor::from_parts(g.shape().to_vec(), data)
    }
}

/// Inverted dropout: training-time masks are scaled by `1 / keep` so that
/// evaluation is the identity.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Dropout {
    pub keep: f64,
    #[serde(skip)]
    mask: Option<Vec<f64>>,
}

impl Dropout {
    pub fn new(rate: f64, semantics: DropoutSemantics) -> Self {
        let keep = match semantics {
            DropoutSemantics::Keep => rate,
            DropoutSemantics::Drop => 1.0 - rate,
        };
        Self { keep, mask: None }
    }

    fn forward(&mut self, x: &Tensor, ctx: &mut ForwardCtx<'_>) -> Tensor {
        if !ctx.training || self.keep >= 1.0 {
            self.mask = None;
            return x.clone();
        }
        let scale = if self.keep > 0.0 { 1.0 / self.keep } else { 0.0 };
        let mask: Vec<f64> = (0..x.len()).map(|_| if ctx.rng.random::<f64>() < self.keep { scale } else { 0.0 }).collect();
        let data = x.data().iter().zip(&mask).map(|(v, m)| v * m).collect();
        self.mask = Some(mask);
        Tensor::from_parts(x.shape().to_vec(), data)
    }

    fn backward(&self, g: &Tensor) -> Tensor {
        match &self.mask {
            None => g.clone(),
            Some(mask) => {
                let data = g.data().iter().zip(mask).map(|(v, m)| v * m).collect();
                Tensor::from_parts(g.shape().to_vec(), data)
            }
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Flatten {
    #[serde(skip)]
    in_shape: Vec<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Layer {
    Dense(Dense),
    Conv2d(Conv2d),
    MaxPool(MaxPool),
    Relu(Relu),
    Dropout(Dropout),
    Flatten(Flatten),
}

impl Layer {
    /// Instantiate `spec` for a per-sample input shape (already validated).
    pub fn build(
        spec: &LayerSpec,
        input: &[usize],
        init: InitScheme,
        dropout: DropoutSemantics,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        spec.output_shape(input)?;
        Ok(match *spec {
            LayerSpec::Dense { units } => Layer::Dense(Dense::new(input[0], units, init, rng)),
            LayerSpec::Conv2d { filters, kernel, stride, padding } => {
                Layer::Conv2d(Conv2d::new([input[0], input[1], input[2]], filters, kernel, stride, padding, init, rng)?)
            }
            LayerSpec::MaxPool { size, stride } => Layer::MaxPool(MaxPool::new([input[0], input[1], input[2]], size, stride)?),
            LayerSpec::Relu => Layer::Relu(Relu::default()),
            LayerSpec::Dropout { rate } => Layer::Dropout(Dropout::new(rate, dropout)),
            LayerSpec::Flatten { .. } => Layer::Flatten(Flatten::default()),
        })
    }

    pub fn forward(&mut self, x: &Tensor, ctx: &mut ForwardCtx<'_>) -> Result<Tensor> {
        match self {
            Layer::Dense(l) => l.forward(x),
            Layer::Conv2d(l) => l.forward(x),
            Layer::MaxPool(l) => l.forward(x),
            Layer::Relu(l) => Ok(l.forward(x)),
            Layer::Dropout(l) => Ok(l.forward(x, ctx)),
            Layer::Flatten(l) => {
                l.in_shape = x.shape().to_vec();
                x.clone().reshape(vec![x.batch(), x.sample_len()])
            }
        }
    }

    /// Accumulate parameter gradients and return the gradient w.r.t. the
    /// layer input (skipped for parameterised layers when not needed).
    pub fn backward(&mut self, g: &Tensor, need_input_grad: bool) -> Option<Tensor> {
        match self {
            Layer::Dense(l) => l.backward(g, need_input_grad),
            Layer::Conv2d(l) => l.backward(g, need_input_grad),
            Layer::MaxPool(l) => Some(l.backward(g)),
            Layer::Relu(l) => Some(l.backward(g)),
            Layer::Dropout(l) => Some(l.backward(g)),
            Layer::Flatten(l) => Some(Tensor::from_parts(l.in_shape.clone(), g.data().to_vec())),
        }
    }

    pub fn params(&self) -> Vec<&Param> {
        match self {
            Layer::Dense(l) => vec![&l.weight, &l.bias],
            Layer::Conv2d(l) => vec![&l.filters, &l.bias],
            _ => Vec::new(),
        }
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        match self {
            Layer::Dense(l) => vec![&mut l.weight, &mut l.bias],
            Layer::Conv2d(l) => vec![&mut l.filters, &mut l.bias],
            _ => Vec::new(),
        }
    }
}
