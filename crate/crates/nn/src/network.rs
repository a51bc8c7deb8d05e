//! Feed-forward network specs, shape validation and the runtime network.

use serde::{Deserialize, Serialize};

use crate::layers::{DropoutSemantics, ForwardCtx, InitScheme, Layer, LayerSpec};
use crate::loss::Loss;
use crate::optim::{Optimizer, OptimizerSpec};
use crate::rng;
use crate::train::{self, LossPoint, TrainConfig, Trainable};
use crate::{NnError, Param, Result, Tensor};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub name: String,
    /// Per-sample input shape, e.g. `[28, 28, 1]`.
    pub input_shape: Vec<usize>,
    pub layers: Vec<LayerSpec>,
    pub loss: Loss,
    pub optimizer: OptimizerSpec,
    pub init: InitScheme,
    #[serde(default)]
    pub dropout: DropoutSemantics,
}

impl NetworkSpec {
    /// Chain shapes through every layer. Returns the per-sample shape after
    /// each layer; fails on the first layer that cannot accept its input or
    /// when the network does not end in a single scalar.
    pub fn validate(&self) -> Result<Vec<Vec<usize>>> {
        if self.input_shape.is_empty() || self.input_shape.contains(&0) {
            return Err(NnError::ShapeMismatch(format!("bad input shape {:?}", self.input_shape)));
        }
        let mut shapes = Vec::with_capacity(self.layers.len());
        let mut cur = self.input_shape.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            cur = layer.output_shape(&cur).map_err(|e| NnError::ShapeMismatch(format!("{}: layer {i}: {e}", self.name)))?;
            shapes.push(cur.clone());
        }
        if cur != [1] {
            return Err(NnError::ShapeMismatch(format!("{}: network must end in one scalar output, ends in {cur:?}", self.name)));
        }
        Ok(shapes)
    }

    /// Width of the first flatten layer's output, if any.
    pub fn flatten_width(&self) -> Result<Option<usize>> {
        let shapes = self.validate()?;
        Ok(self.layers.iter().zip(&shapes).find(|(l, _)| matches!(l, LayerSpec::Flatten { .. })).map(|(_, s)| s[0]))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Network {
    pub spec: NetworkSpec,
    layers: Vec<Layer>,
    pub optimizer: Optimizer,
}

impl Network {
    /// Validate `spec` and initialise parameters from the `init` sub-stream
    /// of `seed`.
    pub fn new(spec: NetworkSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let mut rng = rng::named(seed, "init");
        let mut layers = Vec::with_capacity(spec.layers.len());
        let mut cur = spec.input_shape.clone();
        for ls in &spec.layers {
            layers.push(Layer::build(ls, &cur, spec.init, spec.dropout, &mut rng)?);
            cur = ls.output_shape(&cur)?;
        }
        let optimizer = Optimizer::new(spec.optimizer);
        Ok(Self { spec, layers, optimizer })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    fn check_input(&self, x: &Tensor) -> Result<()> {
        if x.shape().len() < 2 || x.shape()[1..] != self.spec.input_shape[..] {
            return Err(NnError::ShapeMismatch(format!(
                "{} expects [batch, {:?}], got {:?}",
                self.spec.name,
                self.spec.input_shape,
                x.shape()
            )));
        }
        Ok(())
    }

    pub fn forward(&mut self, x: &Tensor, ctx: &mut ForwardCtx<'_>) -> Result<Tensor> {
        self.check_input(x)?;
        let mut cur = x.clone();
        for layer in &mut self.layers {
            cur = layer.forward(&cur, ctx)?;
        }
        Ok(cur)
    }

    pub fn backward(&mut self, grad: &Tensor) -> Tensor {
        let mut g = grad.clone();
        let n = self.layers.len();
        for (i, layer) in self.layers.iter_mut().enumerate().rev() {
            match layer.backward(&g, true) {
                Some(next) => g = next,
                None => unreachable!("input gradient requested for layer {i}/{n}"),
            }
        }
        g
    }

    /// Like [`Network::backward`] but skips the input-gradient computation
    /// of the first layer, which training never needs.
    fn backward_params_only(&mut self, grad: &Tensor) {
        let mut g = grad.clone();
        for (i, layer) in self.layers.iter_mut().enumerate().rev() {
            match layer.backward(&g, i > 0) {
                Some(next) => g = next,
                None => break,
            }
        }
    }

    /// Evaluation-mode predictions, processed in chunks.
    pub fn predict(&mut self, x: &Tensor) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let mut rng = rng::seeded(0);
        let mut ctx = ForwardCtx { training: false, rng: &mut rng };
        let mut out = Vec::with_capacity(x.batch());
        let idx: Vec<usize> = (0..x.batch()).collect();
        for chunk in idx.chunks(64) {
            let y = self.forward(&x.gather(chunk), &mut ctx)?;
            out.extend_from_slice(y.data());
        }
        Ok(out)
    }

    pub fn params(&self) -> Vec<&Param> {
        self.layers.iter().flat_map(|l| l.params()).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        self.layers.iter_mut().flat_map(|l| l.params_mut()).collect()
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|p| p.value.len()).sum()
    }
}

impl Trainable for Network {
    fn forward_batch(&mut self, x: &Tensor, ctx: &mut ForwardCtx<'_>) -> Result<Vec<f64>> {
        Ok(self.forward(x, ctx)?.into_data())
    }

    fn backward_batch(&mut self, dpred: &[f64]) {
        let g = Tensor::from_parts(vec![dpred.len(), 1], dpred.to_vec());
        self.backward_params_only(&g);
    }

    fn parts(&mut self) -> (Vec<&mut Param>, &mut Optimizer) {
        let params = self.layers.iter_mut().flat_map(|l| l.params_mut()).collect();
        (params, &mut self.optimizer)
    }
}

/// Minibatch training of a feed-forward network with its spec's loss.
pub fn train_network(net: &mut Network, inputs: &Tensor, labels: &[f64], cfg: &TrainConfig) -> Result<Vec<LossPoint>> {
    net.check_input(inputs)?;
    let loss = net.spec.loss;
    train::fit(net, loss, inputs, labels, cfg)
}
