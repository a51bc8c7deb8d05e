//! Linear models: least squares, elastic-net coordinate descent, linear
//! ε-insensitive SVR and plain SGD.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::linalg::{dot, normal_equations, solve_spd, Matrix};
use crate::{rng, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub coef: Vec<f64>,
    pub intercept: f64,
}

impl LinearModel {
    pub fn predict_row(&self, x: &[f64]) -> f64 {
        self.intercept + dot(&self.coef, x)
    }

    pub fn predict(&self, x: &Matrix) -> Vec<f64> {
        x.iter_rows().map(|r| self.predict_row(r)).collect()
    }
}

fn check_xy(x: &Matrix, y: &[f64]) -> Result<()> {
    if x.rows() != y.len() {
        return Err(Error::Shape(format!("{} rows but {} targets", x.rows(), y.len())));
    }
    if x.rows() == 0 {
        return Err(Error::TooFewValues { got: 0, need: 1 });
    }
    Ok(())
}

struct Centered {
    cols: Vec<Vec<f64>>,
    means: Vec<f64>,
    y: Vec<f64>,
    y_mean: f64,
}

fn center(x: &Matrix, y: &[f64]) -> Centered {
    let n = x.rows() as f64;
    let y_mean = y.iter().sum::<f64>() / n;
    let mut cols = x.columns();
    let means = cols
        .iter_mut()
        .map(|c| {
            let m = c.iter().sum::<f64>() / n;
            c.iter_mut().for_each(|v| *v -= m);
            m
        })
        .collect();
    Centered { cols, means, y: y.iter().map(|v| v - y_mean).collect(), y_mean }
}

/// Scales centered columns to unit population variance in place and returns
/// the scales; constant columns are left as zeros with scale 0.
fn standardize(cols: &mut [Vec<f64>]) -> Vec<f64> {
    cols.iter_mut()
        .map(|col| {
            let s = (col.iter().map(|v| v * v).sum::<f64>() / col.len() as f64).sqrt();
            if s > 0.0 {
                col.iter_mut().for_each(|v| *v /= s);
            }
            s
        })
        .collect()
}

/// Ridge strength (per sample, i.e. in the mean-squared-error objective)
/// used when the normal equations are singular.
pub const FALLBACK_RIDGE: f64 = 1e-8;

/// Least squares with intercept via the normal equations on centered data.
/// Returns the model and whether the ridge fallback was needed.
pub fn fit_ols(x: &Matrix, y: &[f64]) -> Result<(LinearModel, bool)> {
    check_xy(x, y)?;
    let c = center(x, y);
    let (xtx, xty) = normal_equations(&c.cols, &c.y);
    let sol = solve_spd(&xtx, &xty, FALLBACK_RIDGE * x.rows() as f64)?;
    let intercept = c.y_mean - dot(&c.means, &sol.x);
    Ok((LinearModel { coef: sol.x, intercept }, sol.ridge.is_some()))
}

pub fn soft_threshold(z: f64, t: f64) -> f64 {
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        0.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CdOutcome {
    pub model: LinearModel,
    pub converged: bool,
    pub iterations: usize,
    /// Objective after every full cycle, in standardized coordinates.
    pub objective: Vec<f64>,
}

/// `(1/2N)‖y − Xβ‖² + l1‖β‖₁ + (l2/2)‖β‖²` for standardized columns and
/// centered `y`.
fn en_objective(cols: &[Vec<f64>], y: &[f64], beta: &[f64], l1: f64, l2: f64) -> f64 {
    let n = y.len();
    let mut rss = 0.0;
    for i in 0..n {
        let mut r = y[i];
        for (c, b) in cols.iter().zip(beta) {
            r -= c[i] * b;
        }
        rss += r * r;
    }
    rss / (2.0 * n as f64) + l1 * beta.iter().map(|b| b.abs()).sum::<f64>() + 0.5 * l2 * dot(beta, beta)
}

/// Cyclic coordinate descent on the elastic-net objective. Columns are
/// standardized internally (constant columns get a zero coefficient) and
/// coefficients are mapped back to the caller's units. Stops when the
/// largest coefficient change in a cycle is below `tol`.
pub fn fit_coordinate_descent(x: &Matrix, y: &[f64], l1: f64, l2: f64, tol: f64, max_iter: usize) -> Result<CdOutcome> {
    check_xy(x, y)?;
    if l1 < 0.0 || l2 < 0.0 {
        return Err(Error::BadConfig("penalties must be non-negative".into()));
    }
    let n = x.rows() as f64;
    let mut c = center(x, y);
    let stds = standardize(&mut c.cols);
    let p = c.cols.len();
    let mut beta = vec![0.0; p];
    let mut resid = c.y.clone();
    let mut converged = false;
    let mut iterations = 0;
    let mut objective = Vec::new();
    while iterations < max_iter {
        iterations += 1;
        let mut max_delta: f64 = 0.0;
        for j in 0..p {
            if stds[j] == 0.0 {
                continue;
            }
            let col = &c.cols[j];
            let old = beta[j];
            let rho = dot(col, &resid) / n + old;
            let new = soft_threshold(rho, l1) / (1.0 + l2);
            if new != old {
                let d = new - old;
                for (r, v) in resid.iter_mut().zip(col) {
                    *r -= d * v;
                }
                beta[j] = new;
                max_delta = max_delta.max(d.abs());
            }
        }
        objective.push(en_objective(&c.cols, &c.y, &beta, l1, l2));
        if max_delta < tol {
            converged = true;
            break;
        }
    }
    let coef: Vec<f64> = beta.iter().zip(&stds).map(|(b, s)| if *s > 0.0 { b / s } else { 0.0 }).collect();
    let intercept = c.y_mean - dot(&c.means, &coef);
    Ok(CdOutcome { model: LinearModel { coef, intercept }, converged, iterations, objective })
}

/// Smallest `l1` at which the lasso solution is all zeros:
/// `max_j |x_jᵀ y| / N` on standardized columns and centered `y`. Computed
/// with the same arithmetic as the first coordinate update.
pub fn lambda_max(x: &Matrix, y: &[f64]) -> Result<f64> {
    check_xy(x, y)?;
    let n = x.rows() as f64;
    let mut c = center(x, y);
    standardize(&mut c.cols);
    Ok(c.cols.iter().map(|col| (dot(col, &c.y) / n).abs()).fold(0.0, f64::max))
}

/// Linear ε-insensitive SVR trained with Pegasos-style subgradient steps on
/// `(λ/2)‖w‖² + (1/N) Σ max(0, |y − w·x − b| − ε)`, `λ = 1/(C·N)`, step
/// `1/(λt)`. The intercept is an extra, equally regularized coordinate on a
/// constant input. The returned weights average the iterates of the second
/// half of training. `C = 0` is pure regularization and returns zeros.
pub fn fit_linear_svr(x: &Matrix, y: &[f64], c: f64, epsilon: f64, epochs: usize, seed: u64) -> Result<LinearModel> {
    check_xy(x, y)?;
    if c < 0.0 || epsilon < 0.0 {
        return Err(Error::BadConfig("C and epsilon must be non-negative".into()));
    }
    let p = x.cols();
    if c == 0.0 || epochs == 0 {
        return Ok(LinearModel { coef: vec![0.0; p], intercept: 0.0 });
    }
    let n = x.rows();
    let lambda = 1.0 / (c * n as f64);
    let mut w = vec![0.0; p + 1];
    let mut avg = vec![0.0; p + 1];
    let mut averaged = 0usize;
    let mut order: Vec<usize> = (0..n).collect();
    let mut r = rng::named(seed, "svr");
    let total = epochs * n;
    let mut t = 0usize;
    for _ in 0..epochs {
        order.shuffle(&mut r);
        for &i in &order {
            t += 1;
            let eta = 1.0 / (lambda * t as f64);
            let row = x.row(i);
            let resid = y[i] - dot(&w[..p], row) - w[p];
            let shrink = 1.0 - eta * lambda;
            w.iter_mut().for_each(|v| *v *= shrink);
            if resid.abs() > epsilon {
                let s = eta * resid.signum();
                for (wj, xj) in w.iter_mut().zip(row) {
                    *wj += s * xj;
                }
                w[p] += s;
            }
            if 2 * t > total {
                averaged += 1;
                let k = averaged as f64;
                for (a, v) in avg.iter_mut().zip(&w) {
                    *a += (v - *a) / k;
                }
            }
        }
    }
    let intercept = avg[p];
    avg.truncate(p);
    Ok(LinearModel { coef: avg, intercept })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SgdOutcome {
    pub model: LinearModel,
    /// Model after each epoch.
    pub epochs: Vec<LinearModel>,
}

/// Sample-shuffled SGD on `½(y − w·x − b)²` plus `l1‖w‖₁ + (l2/2)‖w‖²`
/// with `η(t) = eta0 / t^power_t`, `t` the cumulative update count. The L1
/// step is truncated so it never flips a weight's sign.
pub fn fit_sgd_linear(
    x: &Matrix,
    y: &[f64],
    l1: f64,
    l2: f64,
    epochs: usize,
    eta0: f64,
    power_t: f64,
    seed: u64,
    init: Option<LinearModel>,
) -> Result<SgdOutcome> {
    check_xy(x, y)?;
    let p = x.cols();
    let mut m = init.unwrap_or(LinearModel { coef: vec![0.0; p], intercept: 0.0 });
    if m.coef.len() != p {
        return Err(Error::Shape("initial model has the wrong width".into()));
    }
    let mut order: Vec<usize> = (0..x.rows()).collect();
    let mut r = rng::named(seed, "sgd");
    let mut t = 0usize;
    let mut trace = Vec::with_capacity(epochs);
    for _ in 0..epochs {
        order.shuffle(&mut r);
        for &i in &order {
            t += 1;
            let eta = eta0 / (t as f64).powf(power_t);
            let row = x.row(i);
            let err = y[i] - m.predict_row(row);
            for (w, xv) in m.coef.iter_mut().zip(row) {
                let stepped = *w + eta * (err * xv - l2 * *w);
                let l1_step = eta * l1;
                *w = if stepped > l1_step {
                    stepped - l1_step
                } else if stepped < -l1_step {
                    stepped + l1_step
                } else {
                    0.0
                };
            }
            m.intercept += eta * err;
        }
        trace.push(m.clone());
    }
    Ok(SgdOutcome { model: m, epochs: trace })
}
