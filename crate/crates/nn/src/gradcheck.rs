//! Central finite-difference gradient checking.
//!
//! Used by the test suites to verify every analytic backward pass.

use rand::Rng;

use crate::layers::{ForwardCtx, Layer};
use crate::loss::Loss;
use crate::lstm::LstmNetwork;
use crate::network::Network;
use crate::{rng, Param, Result, Tensor};

/// Relative error between an analytic and a numeric derivative:
/// `|a − n| / max(|a|, |n|, floor)`. The floor keeps entries that are
/// numerically zero from dividing by rounding noise.
pub fn rel_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

/// Default denominator floor for [`rel_error`].
pub const REL_FLOOR: f64 = 1e-6;

/// `∂f/∂x_i ≈ (f(x + h e_i) − f(x − h e_i)) / 2h` for every coordinate.
pub fn numeric_gradient<F>(mut f: F, x: &[f64], h: f64) -> Vec<f64>
where
    F: FnMut(&[f64]) -> f64,
{
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = probe[i];
            probe[i] = orig + h;
            let up = f(&probe);
            probe[i] = orig - h;
            let down = f(&probe);
            probe[i] = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Largest [`rel_error`] over paired entries.
pub fn max_rel_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    analytic.iter().zip(numeric).map(|(&a, &n)| rel_error(a, n, REL_FLOOR)).fold(0.0, f64::max)
}

/// Worst relative errors found by one check.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CheckReport {
    pub input: f64,
    pub params: f64,
    pub entries: usize,
}

impl CheckReport {
    pub fn max(&self) -> f64 {
        self.input.max(self.params)
    }
}

/// Anything with parameters whose scalar objective `Σ r ⊙ f(x)` can be
/// evaluated and differentiated.
trait Probe {
    fn output(&mut self, x: &Tensor, seed: u64) -> Result<Vec<f64>>;
    /// Gradient of `Σ r ⊙ f(x)` w.r.t. the input; parameter gradients are
    /// left in the params.
    fn backprop(&mut self, x: &Tensor, r: &[f64], seed: u64) -> Result<Vec<f64>>;
    fn weights(&mut self) -> Vec<&mut Param>;
}

fn mask_ctx(r: &mut rand_chacha::ChaCha8Rng) -> ForwardCtx<'_> {
    ForwardCtx { training: true, rng: r }
}

impl Probe for Layer {
    fn output(&mut self, x: &Tensor, seed: u64) -> Result<Vec<f64>> {
        let mut r = rng::named(seed, "mask");
        Ok(self.forward(x, &mut mask_ctx(&mut r))?.into_data())
    }
    fn backprop(&mut self, x: &Tensor, r: &[f64], seed: u64) -> Result<Vec<f64>> {
        let mut m = rng::named(seed, "mask");
        let out = self.forward(x, &mut mask_ctx(&mut m))?;
        self.params_mut().iter_mut().for_each(|p| p.zero_grad());
        let g = Tensor::new(out.shape().to_vec(), r.to_vec())?;
        Ok(self.backward(&g, true).expect("input gradient").into_data())
    }
    fn weights(&mut self) -> Vec<&mut Param> {
        self.params_mut()
    }
}

impl Probe for Network {
    fn output(&mut self, x: &Tensor, seed: u64) -> Result<Vec<f64>> {
        let mut r = rng::named(seed, "mask");
        Ok(self.forward(x, &mut mask_ctx(&mut r))?.into_data())
    }
    fn backprop(&mut self, x: &Tensor, r: &[f64], seed: u64) -> Result<Vec<f64>> {
        let mut m = rng::named(seed, "mask");
        let out = self.forward(x, &mut mask_ctx(&mut m))?;
        self.params_mut().iter_mut().for_each(|p| p.zero_grad());
        Ok(self.backward(&Tensor::new(out.shape().to_vec(), r.to_vec())?).into_data())
    }
    fn weights(&mut self) -> Vec<&mut Param> {
        self.params_mut()
    }
}

impl Probe for LstmNetwork {
    fn output(&mut self, x: &Tensor, _seed: u64) -> Result<Vec<f64>> {
        self.forward(x)
    }
    fn backprop(&mut self, x: &Tensor, r: &[f64], _seed: u64) -> Result<Vec<f64>> {
        self.forward(x)?;
        self.params_mut().iter_mut().for_each(|p| p.zero_grad());
        Ok(self.backward(r))
    }
    fn weights(&mut self) -> Vec<&mut Param> {
        self.params_mut()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn check<M: Probe>(model: &mut M, x: &Tensor, seed: u64, h: f64) -> Result<CheckReport> {
    let out = model.output(x, seed)?;
    let mut pr = rng::named(seed, "projection");
    let r: Vec<f64> = (0..out.len()).map(|_| pr.random_range(-1.0..1.0)).collect();
    let dx = model.backprop(x, &r, seed)?;
    let analytic: Vec<Vec<f64>> = model.weights().iter().map(|p| p.grad.clone()).collect();

    let objective = |m: &mut M, xt: &Tensor| dot(&m.output(xt, seed).expect("forward"), &r);
    let numeric_dx = numeric_gradient(
        |v| {
            let xt = Tensor::new(x.shape().to_vec(), v.to_vec()).expect("shape");
            objective(model, &xt)
        },
        x.data(),
        h,
    );
    let input = max_rel_error(&dx, &numeric_dx);

    let mut params: f64 = 0.0;
    let mut entries = x.len();
    for (pi, grad) in analytic.iter().enumerate() {
        for (k, &a) in grad.iter().enumerate() {
            let orig = model.weights()[pi].value.data()[k];
            model.weights()[pi].value.data_mut()[k] = orig + h;
            let up = objective(model, x);
            model.weights()[pi].value.data_mut()[k] = orig - h;
            let down = objective(model, x);
            model.weights()[pi].value.data_mut()[k] = orig;
            params = params.max(rel_error(a, (up - down) / (2.0 * h), REL_FLOOR));
            entries += 1;
        }
    }
    Ok(CheckReport { input, params, entries })
}

/// Gradient check of a single layer against `L = Σ r ⊙ layer(x)` with a
/// seeded random projection `r`. Dropout masks are replayed from the same
/// seed on every evaluation.
pub fn check_layer(layer: &mut Layer, x: &Tensor, seed: u64, h: f64) -> Result<CheckReport> {
    check(layer, x, seed, h)
}

/// Gradient check of a whole feed-forward network (input and parameters).
pub fn check_network(net: &mut Network, x: &Tensor, seed: u64, h: f64) -> Result<CheckReport> {
    check(net, x, seed, h)
}

/// Gradient check of an LSTM network through full BPTT.
pub fn check_lstm(net: &mut LstmNetwork, x: &Tensor, seed: u64, h: f64) -> Result<CheckReport> {
    check(net, x, seed, h)
}

/// Gradient check of a loss w.r.t. its predictions.
pub fn check_loss(loss: Loss, pred: &[f64], target: &[f64], h: f64) -> f64 {
    let (_, g) = loss.evaluate(pred, target);
    let numeric = numeric_gradient(|p| loss.evaluate(p, target).0, pred, h);
    max_rel_error(&g, &numeric)
}
