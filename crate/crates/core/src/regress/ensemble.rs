//! Tree ensembles: bootstrap aggregation, random forests, least-absolute-
//! deviation gradient boosting and AdaBoost.R2.

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use super::tree::{Tree, TreeParams};
use crate::linalg::Matrix;
use crate::{rng, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub trees: Vec<Tree>,
}

impl Forest {
    /// `n_trees` trees, each grown on a bootstrap sample drawn from the
    /// `bootstrap` stream (or on every row when `bootstrap` is off). Feature
    /// subsampling, when `params.max_features` is set, draws from the
    /// `features` stream.
    pub fn fit(x: &Matrix, y: &[f64], n_trees: usize, bootstrap: bool, params: TreeParams, seed: u64) -> Result<Self> {
        if n_trees == 0 {
            return Err(Error::BadConfig("an ensemble needs at least one tree".into()));
        }
        let n = x.rows();
        let mut boot = rng::named(seed, "bootstrap");
        let mut feats = rng::named(seed, "features");
        let mut trees = Vec::with_capacity(n_trees);
        for _ in 0..n_trees {
            let rows: Vec<usize> = if bootstrap { (0..n).map(|_| boot.random_range(0..n)).collect() } else { (0..n).collect() };
            trees.push(Tree::fit_rows(x, y, &rows, params, Some(&mut feats))?);
        }
        Ok(Forest { trees })
    }

    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.predict_row(row)).sum::<f64>() / self.trees.len() as f64
    }
}

/// Median; even lengths average the two middle values.
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Smallest value whose cumulative weight reaches half the total.
pub fn weighted_median(values: &[f64], weights: &[f64]) -> f64 {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    let total: f64 = weights.iter().sum();
    let mut acc = 0.0;
    for &i in &order {
        acc += weights[i];
        if acc >= 0.5 * total {
            return values[i];
        }
    }
    values[order[order.len() - 1]]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gbm {
    pub init: f64,
    pub learning_rate: f64,
    pub stages: Vec<Tree>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GbmOutcome {
    pub model: Gbm,
    /// Mean absolute training residual after the initial fit and after each
    /// stage.
    pub train_loss: Vec<f64>,
}

fn mean_abs(y: &[f64], f: &[f64]) -> f64 {
    y.iter().zip(f).map(|(a, b)| (a - b).abs()).sum::<f64>() / y.len() as f64
}

impl Gbm {
    /// Gradient boosting on absolute loss: each stage fits a tree to the
    /// sign of the residual and then resets every leaf to the median
    /// residual of the training rows it holds.
    pub fn fit(x: &Matrix, y: &[f64], n_stages: usize, learning_rate: f64, params: TreeParams) -> Result<GbmOutcome> {
        if x.rows() != y.len() || y.is_empty() {
            return Err(Error::Shape(format!("{} rows but {} targets", x.rows(), y.len())));
        }
        if !(learning_rate > 0.0) {
            return Err(Error::BadConfig("learning rate must be positive".into()));
        }
        let init = median(y);
        let mut f = vec![init; y.len()];
        let mut train_loss = vec![mean_abs(y, &f)];
        let mut stages = Vec::with_capacity(n_stages);
        for _ in 0..n_stages {
            let resid: Vec<f64> = y.iter().zip(&f).map(|(a, b)| a - b).collect();
            let sign: Vec<f64> = resid
                .iter()
                .map(|r| {
                    if *r > 0.0 {
                        1.0
                    } else if *r < 0.0 {
                        -1.0
                    } else {
                        0.0
                    }
                })
                .collect();
            let mut tree = Tree::fit(x, &sign, params)?;
            let leaves: Vec<usize> = x.iter_rows().map(|r| tree.apply(r)).collect();
            let mut by_leaf: std::collections::BTreeMap<usize, Vec<f64>> = Default::default();
            for (leaf, r) in leaves.iter().zip(&resid) {
                by_leaf.entry(*leaf).or_default().push(*r);
            }
            for (leaf, rs) in &by_leaf {
                tree.set_leaf(*leaf, median(rs));
            }
            for (fi, row) in f.iter_mut().zip(x.iter_rows()) {
                *fi += learning_rate * tree.predict_row(row);
            }
            train_loss.push(mean_abs(y, &f));
            stages.push(tree);
        }
        Ok(GbmOutcome { model: Gbm { init, learning_rate, stages }, train_loss })
    }

    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.init + self.stages.iter().map(|t| self.learning_rate * t.predict_row(row)).sum::<f64>()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoostLoss {
    Linear,
    Square,
    Exponential,
}

impl BoostLoss {
    fn apply(self, e: f64) -> f64 {
        match self {
            BoostLoss::Linear => e,
            BoostLoss::Square => e * e,
            BoostLoss::Exponential => 1.0 - (-e).exp(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostRound {
    /// Training rows drawn for this round's learner.
    pub sample: Vec<usize>,
    pub avg_loss: f64,
    pub beta: f64,
    pub estimator_weight: f64,
    /// Normalized sample weights after the update.
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaBoost {
    pub estimators: Vec<Tree>,
    pub estimator_weights: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdaBoostOutcome {
    pub model: AdaBoost,
    pub rounds: Vec<BoostRound>,
    /// Boosting stopped because a learner had average loss of at least one
    /// half; if it was the first learner it is kept as the sole member.
    pub stopped_early: bool,
}

/// Draws `n` row indices with probability proportional to `weights`: for
/// each uniform `u` in `[0, 1)` the first row whose cumulative weight
/// exceeds `u · total` is picked.
pub fn weighted_resample(weights: &[f64], rng: &mut dyn RngCore) -> Vec<usize> {
    let total: f64 = weights.iter().sum();
    let mut cdf = Vec::with_capacity(weights.len());
    let mut acc = 0.0;
    for w in weights {
        acc += w;
        cdf.push(acc);
    }
    (0..weights.len())
        .map(|_| {
            let u: f64 = rng.random::<f64>() * total;
            cdf.partition_point(|&c| c <= u).min(weights.len() - 1)
        })
        .collect()
}

impl AdaBoost {
    /// Drucker's AdaBoost.R2. Every round resamples the training set from
    /// the `adaboost` stream with [`weighted_resample`], fits a tree, scores
    /// all rows by `loss(|error| / max|error|)` and reweights by
    /// `β^(lr·(1 − L_i))`, `β = L̄/(1 − L̄)`. A perfect learner ends boosting
    /// with weight 1.
    pub fn fit(
        x: &Matrix,
        y: &[f64],
        n_estimators: usize,
        learning_rate: f64,
        loss: BoostLoss,
        params: TreeParams,
        seed: u64,
    ) -> Result<AdaBoostOutcome> {
        if x.rows() != y.len() || y.is_empty() {
            return Err(Error::Shape(format!("{} rows but {} targets", x.rows(), y.len())));
        }
        if n_estimators == 0 || !(learning_rate > 0.0) {
            return Err(Error::BadConfig("adaboost needs estimators and a positive learning rate".into()));
        }
        let n = y.len();
        let mut w = vec![1.0 / n as f64; n];
        let mut r = rng::named(seed, "adaboost");
        let mut model = AdaBoost { estimators: Vec::new(), estimator_weights: Vec::new() };
        let mut rounds = Vec::new();
        let mut stopped_early = false;
        for _ in 0..n_estimators {
            let sample = weighted_resample(&w, &mut r);
            let tree = Tree::fit_rows(x, y, &sample, params, None)?;
            let err: Vec<f64> = x.iter_rows().zip(y).map(|(row, t)| (tree.predict_row(row) - t).abs()).collect();
            let emax = err.iter().copied().fold(0.0, f64::max);
            if emax == 0.0 {
                model.estimators.push(tree);
                model.estimator_weights.push(1.0);
                rounds.push(BoostRound { sample, avg_loss: 0.0, beta: 0.0, estimator_weight: 1.0, weights: w.clone() });
                break;
            }
            let l: Vec<f64> = err.iter().map(|e| loss.apply(e / emax)).collect();
            let avg: f64 = l.iter().zip(&w).map(|(a, b)| a * b).sum();
            if avg >= 0.5 {
                stopped_early = true;
                if model.estimators.is_empty() {
                    model.estimators.push(tree);
                    model.estimator_weights.push(1.0);
                    rounds.push(BoostRound { sample, avg_loss: avg, beta: f64::NAN, estimator_weight: 1.0, weights: w.clone() });
                }
                break;
            }
            let beta = avg / (1.0 - avg);
            let weight = learning_rate * (1.0 / beta).ln();
            for (wi, li) in w.iter_mut().zip(&l) {
                *wi *= beta.powf((1.0 - li) * learning_rate);
            }
            let total: f64 = w.iter().sum();
            w.iter_mut().for_each(|v| *v /= total);
            model.estimators.push(tree);
            model.estimator_weights.push(weight);
            rounds.push(BoostRound { sample, avg_loss: avg, beta, estimator_weight: weight, weights: w.clone() });
        }
        Ok(AdaBoostOutcome { model, rounds, stopped_early })
    }

    /// Weighted median of the members' predictions.
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let preds: Vec<f64> = self.estimators.iter().map(|t| t.predict_row(row)).collect();
        weighted_median(&preds, &self.estimator_weights)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weighted_median_cases() {
        assert_eq!(weighted_median(&[3.0, 1.0, 2.0], &[1.0, 1.0, 1.0]), 2.0);
        assert_eq!(weighted_median(&[1.0, 2.0], &[1.0, 1.0]), 1.0);
        assert_eq!(weighted_median(&[1.0, 2.0, 3.0], &[0.1, 0.1, 5.0]), 3.0);
    }

    #[test]
    fn resample_respects_zero_weight() {
        let mut r = rng::named(1, "t");
        let s = weighted_resample(&[0.0, 1.0, 0.0, 1.0], &mut r);
        assert!(s.iter().all(|&i| i == 1 || i == 3));
    }
}
