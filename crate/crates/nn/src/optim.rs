//! First-order optimizers with serializable state.

use serde::{Deserialize, Serialize};

use crate::Param;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum OptimizerSpec {
    Sgd { lr: f64 },
    RmsProp { lr: f64, decay: f64, eps: f64 },
    Adam { lr: f64, beta1: f64, beta2: f64, eps: f64 },
}

impl OptimizerSpec {
    /// Adam with lr 0.001, β1 0.9, β2 0.999, ε 1e-8.
    pub fn adam_default() -> Self {
        OptimizerSpec::Adam { lr: 0.001, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }

    pub fn lr(&self) -> f64 {
        match *self {
            OptimizerSpec::Sgd { lr } | OptimizerSpec::RmsProp { lr, .. } | OptimizerSpec::Adam { lr, .. } => lr,
        }
    }
}

/// Optimizer plus per-parameter moment buffers, in parameter order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Optimizer {
    pub spec: OptimizerSpec,
    pub steps: u64,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
}

impl Optimizer {
    pub fn new(spec: OptimizerSpec) -> Self {
        Self { spec, steps: 0, first: Vec::new(), second: Vec::new() }
    }

    fn ensure_state(&mut self, params: &[&mut Param]) {
        if self.first.len() != params.len() {
            self.first = params.iter().map(|p| vec![0.0; p.value.len()]).collect();
            self.second = params.iter().map(|p| vec![0.0; p.value.len()]).collect();
        }
    }

    /// Apply one update using the gradients currently stored in `params`.
    pub fn step(&mut self, params: &mut [&mut Param]) {
        self.ensure_state(params);
        self.steps += 1;
        match self.spec {
            OptimizerSpec::Sgd { lr } => {
                for p in params.iter_mut() {
                    let grad = std::mem::take(&mut p.grad);
                    for (w, g) in p.value.data_mut().iter_mut().zip(&grad) {
                        *w -= lr * g;
                    }
                    p.grad = grad;
                }
            }
            OptimizerSpec::RmsProp { lr, decay, eps } => {
                for (p, v) in params.iter_mut().zip(self.second.iter_mut()) {
                    let grad = std::mem::take(&mut p.grad);
                    for ((w, g), s) in p.value.data_mut().iter_mut().zip(&grad).zip(v.iter_mut()) {
                        *s = decay * *s + (1.0 - decay) * g * g;
                        *w -= lr * g / (s.sqrt() + eps);
                    }
                    p.grad = grad;
                }
            }
            OptimizerSpec::Adam { lr, beta1, beta2, eps } => {
                let t = self.steps as i32;
                let c1 = 1.0 - beta1.powi(t);
                let c2 = 1.0 - beta2.powi(t);
                for ((p, m), v) in params.iter_mut().zip(self.first.iter_mut()).zip(self.second.iter_mut()) {
                    let grad = std::mem::take(&mut p.grad);
                    for (((w, g), mi), vi) in p.value.data_mut().iter_mut().zip(&grad).zip(m.iter_mut()).zip(v.iter_mut()) {
                        *mi = beta1 * *mi + (1.0 - beta1) * g;
                        *vi = beta2 * *vi + (1.0 - beta2) * g * g;
                        let m_hat = *mi / c1;
                        let v_hat = *vi / c2;
                        *w -= lr * m_hat / (v_hat.sqrt() + eps);
                    }
                    p.grad = grad;
                }
            }
        }
    }
}
