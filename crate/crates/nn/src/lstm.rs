//! LSTM regression networks over framed multichannel signals.
//!
//! Gate blocks are stacked in the order input, forget, cell, output inside
//! every `4H`-row weight matrix. A network is one or two stacked layers; the
//! last layer's final hidden state feeds a dense `H → 1` head.

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::gemm::gemm;
use crate::layers::{ForwardCtx, InitScheme};
use crate::loss::Loss;
use crate::optim::{Optimizer, OptimizerSpec};
use crate::rng;
use crate::train::{self, LossPoint, TrainConfig, Trainable};
use crate::{NnError, Param, Result, Tensor};

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmSpec {
    pub input_size: usize,
    pub hidden_size: usize,
    /// 1 or 2 stacked layers.
    pub layers: usize,
    pub init_std: f64,
    pub forget_bias: f64,
    pub loss: Loss,
    pub optimizer: OptimizerSpec,
}

impl LstmSpec {
    pub fn new(input_size: usize, layers: usize) -> Self {
        Self {
            input_size,
            hidden_size: 30,
            layers,
            init_std: 0.1,
            forget_bias: 1.0,
            loss: Loss::Mse,
            optimizer: OptimizerSpec::adam_default(),
        }
    }

    fn validate(&self) -> Result<()> {
        if !(1..=2).contains(&self.layers) {
            return Err(NnError::InvalidConfig(format!("LSTM supports 1 or 2 layers, got {}", self.layers)));
        }
        if self.input_size == 0 || self.hidden_size == 0 {
            return Err(NnError::InvalidConfig("LSTM sizes must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default)]
struct StepCache {
    batch: usize,
    steps: usize,
    /// Layer input, `[batch · steps, input]`.
    x: Vec<f64>,
    /// Activated gates per step, `[steps][batch][4H]`.
    gates: Vec<f64>,
    /// Cell states `c_0 ..= c_T`, `[steps + 1][batch][H]`.
    c: Vec<f64>,
    /// `tanh(c_t)` for `t = 1..=T`, `[steps][batch][H]`.
    tanh_c: Vec<f64>,
    /// Hidden states `h_0 ..= h_T`, `[steps + 1][batch][H]`.
    h: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LstmLayer {
    /// `[4H, input]`
    pub wx: Param,
    /// `[4H, H]`
    pub wh: Param,
    /// `[4H]`
    pub bias: Param,
    input_size: usize,
    hidden_size: usize,
    #[serde(skip)]
    cache: StepCache,
}

impl LstmLayer {
    pub fn new(input_size: usize, hidden_size: usize, init_std: f64, forget_bias: f64, rng: &mut ChaCha8Rng) -> Self {
        let init = InitScheme::Normal { std: init_std };
        let g = 4 * hidden_size;
        let mut bias = vec![0.0; g];
        bias[hidden_size..2 * hidden_size].iter_mut().for_each(|b| *b = forget_bias);
        Self {
            wx: Param::new(init.sample(vec![g, input_size], input_size, g, rng), true),
            wh: Param::new(init.sample(vec![g, hidden_size], hidden_size, g, rng), true),
            bias: Param::new(Tensor::from_parts(vec![g], bias), false),
            input_size,
            hidden_size,
            cache: StepCache::default(),
        }
    }

    pub fn input_size(&self) -> usize {
        self.input_size
    }

    pub fn hidden_size(&self) -> usize {
        self.hidden_size
    }

    /// Run the layer over `x = [batch, steps, input]` from zero state and
    /// return the hidden sequence `[batch, steps, H]`.
    fn forward(&mut self, x: &[f64], batch: usize, steps: usize) -> Vec<f64> {
        let (hs, g4, ni) = (self.hidden_size, 4 * self.hidden_size, self.input_size);
        let bt = batch * steps;
        let mut xproj = vec![0.0; bt * g4];
        gemm(bt, ni, g4, x, false, self.wx.value.data(), true, 0.0, &mut xproj);

        let mut cache = std::mem::take(&mut self.cache);
        cache.batch = batch;
        cache.steps = steps;
        cache.x.clear();
        cache.x.extend_from_slice(x);
        cache.gates.clear();
        cache.gates.resize(steps * batch * g4, 0.0);
        cache.c.clear();
        cache.c.resize((steps + 1) * batch * hs, 0.0);
        cache.tanh_c.clear();
        cache.tanh_c.resize(steps * batch * hs, 0.0);
        cache.h.clear();
        cache.h.resize((steps + 1) * batch * hs, 0.0);

        let bias = self.bias.value.data();
        let mut out = vec![0.0; bt * hs];
        for t in 0..steps {
            let z = &mut cache.gates[t * batch * g4..(t + 1) * batch * g4];
            let h_prev = &cache.h[t * batch * hs..(t + 1) * batch * hs];
            gemm(batch, hs, g4, h_prev, false, self.wh.value.data(), true, 0.0, z);
            for b in 0..batch {
                let zb = &mut z[b * g4..(b + 1) * g4];
                let xp = &xproj[(b * steps + t) * g4..(b * steps + t + 1) * g4];
                for ((zv, xv), bv) in zb.iter_mut().zip(xp).zip(bias) {
                    *zv += xv + bv;
                }
                for (k, zv) in zb.iter_mut().enumerate() {
                    *zv = if (2 * hs..3 * hs).contains(&k) { zv.tanh() } else { sigmoid(*zv) };
                }
                for j in 0..hs {
                    let (i, f, g, o) = (zb[j], zb[hs + j], zb[2 * hs + j], zb[3 * hs + j]);
                    let c_prev = cache.c[(t * batch + b) * hs + j];
                    let c = f * c_prev + i * g;
                    let tc = c.tanh();
                    let h = o * tc;
                    cache.c[((t + 1) * batch + b) * hs + j] = c;
                    cache.tanh_c[(t * batch + b) * hs + j] = tc;
                    cache.h[((t + 1) * batch + b) * hs + j] = h;
                    out[(b * steps + t) * hs + j] = h;
                }
            }
        }
        self.cache = cache;
        out
    }

    /// Backpropagate `dh = d loss / d h_t` for every step (`[batch, steps, H]`)
    /// through time. Accumulates parameter gradients and optionally returns
    /// the gradient w.r.t. the layer input.
    fn backward(&mut self, dh_seq: &[f64], need_input_grad: bool) -> Option<Vec<f64>> {
        let (hs, g4, ni) = (self.hidden_size, 4 * self.hidden_size, self.input_size);
        let cache = std::mem::take(&mut self.cache);
        let (batch, steps) = (cache.batch, cache.steps);
        let bt = batch * steps;
        let mut dz_all = vec![0.0; bt * g4];
        let mut dz = vec![0.0; batch * g4];
        let mut dh_next = vec![0.0; batch * hs];
        let mut dc_next = vec![0.0; batch * hs];
        for t in (0..steps).rev() {
            for b in 0..batch {
                let gates = &cache.gates[(t * batch + b) * g4..(t * batch + b + 1) * g4];
                let dzb = &mut dz[b * g4..(b + 1) * g4];
                for j in 0..hs {
                    let (i, f, g, o) = (gates[j], gates[hs + j], gates[2 * hs + j], gates[3 * hs + j]);
                    let tc = cache.tanh_c[(t * batch + b) * hs + j];
                    let c_prev = cache.c[(t * batch + b) * hs + j];
                    let dh = dh_seq[(b * steps + t) * hs + j] + dh_next[b * hs + j];
                    let d_o = dh * tc;
                    let dc = dh * o * (1.0 - tc * tc) + dc_next[b * hs + j];
                    dc_next[b * hs + j] = dc * f;
                    dzb[j] = dc * g * i * (1.0 - i);
                    dzb[hs + j] = dc * c_prev * f * (1.0 - f);
                    dzb[2 * hs + j] = dc * i * (1.0 - g * g);
                    dzb[3 * hs + j] = d_o * o * (1.0 - o);
                }
                dz_all[(b * steps + t) * g4..(b * steps + t + 1) * g4].copy_from_slice(dzb);
            }
            let h_prev = &cache.h[t * batch * hs..(t + 1) * batch * hs];
            gemm(g4, batch, hs, &dz, true, h_prev, false, 1.0, self.wh.grad_mut());
            gemm(batch, g4, hs, &dz, false, self.wh.value.data(), false, 0.0, &mut dh_next);
            let db = self.bias.grad_mut();
            for row in dz.chunks(g4) {
                for (d, v) in db.iter_mut().zip(row) {
                    *d += v;
                }
            }
        }
        gemm(g4, bt, ni, &dz_all, true, &cache.x, false, 1.0, self.wx.grad_mut());
        let dx = need_input_grad.then(|| {
            let mut dx = vec![0.0; bt * ni];
            gemm(bt, g4, ni, &dz_all, false, self.wx.value.data(), false, 0.0, &mut dx);
            dx
        });
        self.cache = cache;
        dx
    }
}

/// One LSTM step for a single sample; returns `(h_t, c_t)`.
///
/// `i, f, o = σ(·)`, `g = tanh(·)`, `c_t = f ⊙ c_prev + i ⊙ g`,
/// `h_t = o ⊙ tanh(c_t)`.
pub fn lstm_step(layer: &LstmLayer, x: &[f64], h_prev: &[f64], c_prev: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let hs = layer.hidden_size;
    let wx = layer.wx.value.data();
    let wh = layer.wh.value.data();
    let bias = layer.bias.value.data();
    let pre = |row: usize| -> f64 {
        let mut s = bias[row];
        for (k, xv) in x.iter().enumerate() {
            s += wx[row * layer.input_size + k] * xv;
        }
        for (k, hv) in h_prev.iter().enumerate() {
            s += wh[row * hs + k] * hv;
        }
        s
    };
    let mut h = vec![0.0; hs];
    let mut c = vec![0.0; hs];
    for j in 0..hs {
        let i = sigmoid(pre(j));
        let f = sigmoid(pre(hs + j));
        let g = pre(2 * hs + j).tanh();
        let o = sigmoid(pre(3 * hs + j));
        c[j] = f * c_prev[j] + i * g;
        h[j] = o * c[j].tanh();
    }
    (h, c)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LstmNetwork {
    pub spec: LstmSpec,
    pub layers: Vec<LstmLayer>,
    /// `[1, H]`
    pub head_w: Param,
    /// `[1]`
    pub head_b: Param,
    pub optimizer: Optimizer,
    #[serde(skip)]
    last_h: Vec<f64>,
    #[serde(skip)]
    shape: (usize, usize),
}

impl LstmNetwork {
    pub fn new(spec: LstmSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let mut rng = rng::named(seed, "init");
        let mut layers = Vec::with_capacity(spec.layers);
        for l in 0..spec.layers {
            let input = if l == 0 { spec.input_size } else { spec.hidden_size };
            layers.push(LstmLayer::new(input, spec.hidden_size, spec.init_std, spec.forget_bias, &mut rng));
        }
        let head = InitScheme::Normal { std: spec.init_std }.sample(vec![1, spec.hidden_size], spec.hidden_size, 1, &mut rng);
        Ok(Self {
            optimizer: Optimizer::new(spec.optimizer),
            spec,
            layers,
            head_w: Param::new(head, true),
            head_b: Param::new(Tensor::zeros(vec![1]), false),
            last_h: Vec::new(),
            shape: (0, 0),
        })
    }

    fn check_input(&self, x: &Tensor) -> Result<(usize, usize)> {
        match *x.shape() {
            [b, t, i] if i == self.spec.input_size => Ok((b, t)),
            _ => {
                Err(NnError::ShapeMismatch(format!("LSTM expects [batch, steps, {}], got {:?}", self.spec.input_size, x.shape())))
            }
        }
    }

    /// Predictions for `x = [batch, steps, input]`.
    pub fn forward(&mut self, x: &Tensor) -> Result<Vec<f64>> {
        let (batch, steps) = self.check_input(x)?;
        let hs = self.spec.hidden_size;
        let mut cur = x.data().to_vec();
        for layer in &mut self.layers {
            cur = layer.forward(&cur, batch, steps);
        }
        self.last_h.clear();
        for b in 0..batch {
            let off = (b * steps + steps - 1) * hs;
            self.last_h.extend_from_slice(&cur[off..off + hs]);
        }
        self.shape = (batch, steps);
        let w = self.head_w.value.data();
        let b0 = self.head_b.value.data()[0];
        Ok(self.last_h.chunks(hs).map(|h| h.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() + b0).collect())
    }

    /// Accumulate gradients for `d loss / d prediction`; returns the
    /// gradient w.r.t. the input sequence.
    pub fn backward(&mut self, dpred: &[f64]) -> Vec<f64> {
        self.backward_inner(dpred, true).expect("input gradient requested")
    }

    fn backward_inner(&mut self, dpred: &[f64], need_input_grad: bool) -> Option<Vec<f64>> {
        let (batch, steps) = self.shape;
        let hs = self.spec.hidden_size;
        {
            let dw = self.head_w.grad_mut();
            for (h, d) in self.last_h.chunks(hs).zip(dpred) {
                for (g, hv) in dw.iter_mut().zip(h) {
                    *g += d * hv;
                }
            }
        }
        self.head_b.grad_mut()[0] += dpred.iter().sum::<f64>();
        let w = self.head_w.value.data();
        let mut dh_seq = vec![0.0; batch * steps * hs];
        for (b, d) in dpred.iter().enumerate() {
            let off = (b * steps + steps - 1) * hs;
            for j in 0..hs {
                dh_seq[off + j] = d * w[j];
            }
        }
        let n = self.layers.len();
        let mut grad = Some(dh_seq);
        for (l, layer) in self.layers.iter_mut().enumerate().rev() {
            let need = l > 0 || need_input_grad;
            grad = layer.backward(grad.as_deref().expect("upstream gradient"), need);
            debug_assert!(need || l == 0, "layer {l}/{n}");
        }
        grad
    }

    pub fn predict(&mut self, x: &Tensor) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let idx: Vec<usize> = (0..x.batch()).collect();
        let mut out = Vec::with_capacity(idx.len());
        for chunk in idx.chunks(64) {
            out.extend(self.forward(&x.gather(chunk))?);
        }
        Ok(out)
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut v: Vec<&mut Param> = Vec::new();
        for l in &mut self.layers {
            v.push(&mut l.wx);
            v.push(&mut l.wh);
            v.push(&mut l.bias);
        }
        v.push(&mut self.head_w);
        v.push(&mut self.head_b);
        v
    }
}

impl Trainable for LstmNetwork {
    fn forward_batch(&mut self, x: &Tensor, _ctx: &mut ForwardCtx<'_>) -> Result<Vec<f64>> {
        self.forward(x)
    }

    fn backward_batch(&mut self, dpred: &[f64]) {
        self.backward_inner(dpred, false);
    }

    fn parts(&mut self) -> (Vec<&mut Param>, &mut Optimizer) {
        let mut v: Vec<&mut Param> = Vec::new();
        for l in &mut self.layers {
            v.push(&mut l.wx);
            v.push(&mut l.wh);
            v.push(&mut l.bias);
        }
        v.push(&mut self.head_w);
        v.push(&mut self.head_b);
        (v, &mut self.optimizer)
    }
}

pub fn train_lstm(net: &mut LstmNetwork, inputs: &Tensor, labels: &[f64], cfg: &TrainConfig) -> Result<Vec<LossPoint>> {
    net.check_input(inputs)?;
    let loss = net.spec.loss;
    train::fit(net, loss, inputs, labels, cfg)
}

/// How a `[samples × channels]` signal block becomes an LSTM sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Framing {
    /// Contiguous windows of `size` samples; each step carries the window of
    /// every channel back to back (`size · channels` features).
    Windows { size: usize },
    /// One step per sample tick, `channels` features.
    PerSample,
}

impl Framing {
    /// `(steps, features)` for `len` samples of `channels` channels.
    pub fn dims(&self, len: usize, channels: usize) -> Result<(usize, usize)> {
        match *self {
            Framing::Windows { size } => {
                if size == 0 || len % size != 0 {
                    return Err(NnError::InvalidConfig(format!("window {size} does not divide {len} samples")));
                }
                Ok((len / size, size * channels))
            }
            Framing::PerSample => Ok((len, channels)),
        }
    }

    /// Frame equal-length channels into a `steps × features` row-major block.
    pub fn frame(&self, channels: &[Vec<f64>]) -> Result<Vec<f64>> {
        let len = channels.first().map_or(0, Vec::len);
        if channels.iter().any(|c| c.len() != len) {
            return Err(NnError::ShapeMismatch("channels differ in length".into()));
        }
        let (steps, feats) = self.dims(len, channels.len())?;
        let mut out = Vec::with_capacity(steps * feats);
        match *self {
            Framing::Windows { size } => {
                for t in 0..steps {
                    for ch in channels {
                        out.extend_from_slice(&ch[t * size..(t + 1) * size]);
                    }
                }
            }
            Framing::PerSample => {
                for t in 0..len {
                    out.extend(channels.iter().map(|ch| ch[t]));
                }
            }
        }
        Ok(out)
    }
}
