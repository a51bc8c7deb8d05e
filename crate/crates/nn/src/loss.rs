//! Regression losses with their gradients w.r.t. the predictions.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Loss {
    /// Mean absolute error.
    L1,
    Mse,
    Rmse,
    /// Mean Huber loss: `e²/2` inside `delta`, `delta·(|e| − delta/2)` outside.
    Huber {
        delta: f64,
    },
}

impl Loss {
    /// Mean loss over the batch and `d loss / d pred`.
    pub fn evaluate(&self, pred: &[f64], target: &[f64]) -> (f64, Vec<f64>) {
        assert_eq!(pred.len(), target.len(), "prediction/target length mismatch");
        let n = pred.len() as f64;
        let err: Vec<f64> = pred.iter().zip(target).map(|(p, t)| p - t).collect();
        match *self {
            Loss::L1 => {
                let value = err.iter().map(|e| e.abs()).sum::<f64>() / n;
                let grad = err.iter().map(|&e| sign(e) / n).collect();
                (value, grad)
            }
            Loss::Mse => {
                let value = err.iter().map(|e| e * e).sum::<f64>() / n;
                let grad = err.iter().map(|&e| 2.0 * e / n).collect();
                (value, grad)
            }
            Loss::Rmse => {
                let value = (err.iter().map(|e| e * e).sum::<f64>() / n).sqrt();
                let grad = if value > 0.0 { err.iter().map(|&e| e / (n * value)).collect() } else { vec![0.0; err.len()] };
                (value, grad)
            }
            Loss::Huber { delta } => {
                let mut value = 0.0;
                let grad = err
                    .iter()
                    .map(|&e| {
                        if e.abs() <= delta {
                            value += 0.5 * e * e;
                            e / n
                        } else {
                            value += delta * (e.abs() - 0.5 * delta);
                            delta * sign(e) / n
                        }
                    })
                    .collect();
                (value / n, grad)
            }
        }
    }
}

fn sign(e: f64) -> f64 {
    if e > 0.0 {
        1.0
    } else if e < 0.0 {
        -1.0
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const ALL: [Loss; 4] = [Loss::L1, Loss::Mse, Loss::Rmse, Loss::Huber { delta: 1.0 }];

    #[test]
    fn exact_predictions_cost_nothing() {
        let y = [0.3, -1.2, 4.0];
        for loss in ALL {
            let (v, g) = loss.evaluate(&y, &y);
            assert_eq!(v, 0.0, "{loss:?}");
            assert!(g.iter().all(|&x| x == 0.0));
        }
    }

    #[test]
    fn l1_gradient_is_scaled_sign() {
        let (_, g) = Loss::L1.evaluate(&[1.0, -1.0, 0.5, 2.0], &[0.0, 0.0, 0.5, 5.0]);
        assert_eq!(g, vec![0.25, -0.25, 0.0, -0.25]);
    }

    #[test]
    fn huber_matches_piecewise_closed_form() {
        let h = Loss::Huber { delta: 1.0 };
        let (small, _) = h.evaluate(&[0.5], &[0.0]);
        let (mse, _) = Loss::Mse.evaluate(&[0.5], &[0.0]);
        assert!((small - mse / 2.0).abs() < 1e-15);
        let (large, _) = h.evaluate(&[2.0], &[0.0]);
        let (l1, _) = Loss::L1.evaluate(&[2.0], &[0.0]);
        assert!((large - (l1 - 0.5)).abs() < 1e-15);
    }
}
