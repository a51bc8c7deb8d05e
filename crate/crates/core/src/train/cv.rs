use serde::{Deserialize, Serialize};

use crate::dataset::folds;
use crate::linalg::{mean, Matrix};
use crate::preprocess::Standardizer;
use crate::regress::{score, ModelSpec, Regressor};
use crate::{Error, Result};

use super::config::{GridAxis, SelectConfig};
use super::pipeline::FittedStats;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvSummary {
    pub folds: usize,
    /// Mean of per-fold R², or the pooled R² when `pooled`.
    pub r2: f64,
    /// Population standard deviation of per-fold R² (0 when pooled).
    pub r2_std: f64,
    pub mse: f64,
    pub mse_std: f64,
    pub pooled: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<String>,
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let m = mean(v);
    (m, (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / v.len() as f64).sqrt())
}

/// `k`-fold cross-validation of `spec` on raw descriptor columns. Scaling
/// and target standardization are refitted inside every fold's training
/// part; per-fold MSE is in that fold's standardized target units.
///
/// With `pooled`, or when `k` equals the number of rows (a single held-out
/// point has no R²), R² and MSE come from the pooled out-of-fold residuals
/// in units of the standardized `y`; the latter case is flagged `loo_pooled`.
pub fn kfold_cv(spec: &ModelSpec, x: &Matrix, y: &[f64], k: usize, seed: u64, pooled: bool) -> Result<CvSummary> {
    if x.rows() != y.len() {
        return Err(Error::Shape(format!("{} rows but {} targets", x.rows(), y.len())));
    }
    let fold_rows = folds(x.rows(), k, seed, "cv-folds")?;
    let names: Vec<String> = (0..x.cols()).map(|j| format!("c{j}")).collect();
    let no_select = SelectConfig { enabled: false, ..SelectConfig::default() };
    let mut flags = Vec::new();
    let loo = k == x.rows();
    let pooled = pooled || loo;
    if loo {
        flags.push("loo_pooled".to_string());
    }
    let mut r2s = Vec::with_capacity(k);
    let mut mses = Vec::with_capacity(k);
    let mut oof = vec![0.0; y.len()];
    for held in &fold_rows {
        let train: Vec<usize> = (0..x.rows()).filter(|i| held.binary_search(i).is_err()).collect();
        let ytr: Vec<f64> = train.iter().map(|&i| y[i]).collect();
        let stats = FittedStats::fit(&x.select_rows(&train), &names, &ytr, &no_select, seed)?;
        let mut model = Regressor::new(spec.clone(), seed);
        model.fit(&stats.transform(&x.select_rows(&train))?, &stats.target.apply(&ytr)?)?;
        for f in &model.flags {
            if !flags.contains(f) {
                flags.push(f.clone());
            }
        }
        let pred = model.predict(&stats.transform(&x.select_rows(held))?)?;
        let raw = stats.target.inverse(&pred)?;
        for (&i, p) in held.iter().zip(raw) {
            oof[i] = p;
        }
        if !pooled {
            let truth: Vec<f64> = held.iter().map(|&i| y[i]).collect();
            let s = score(&pred, &stats.target.apply(&truth)?)?;
            r2s.push(s.r2);
            mses.push(s.mse);
        }
    }
    if pooled {
        let all = Standardizer::fit(y)?;
        let s = score(&all.apply(&oof)?, &all.apply(y)?)?;
        return Ok(CvSummary { folds: k, r2: s.r2, r2_std: 0.0, mse: s.mse, mse_std: 0.0, pooled: true, flags });
    }
    let (r2, r2_std) = mean_std(&r2s);
    let (mse, mse_std) = mean_std(&mses);
    Ok(CvSummary { folds: k, r2, r2_std, mse, mse_std, pooled: false, flags })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub params: serde_json::Map<String, serde_json::Value>,
    pub spec: ModelSpec,
    pub cv: CvSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridOutcome {
    pub best: ModelSpec,
    pub best_index: usize,
    pub table: Vec<GridRow>,
}

/// Cartesian product of `axes` applied to `base`, first axis slowest.
pub fn expand_grid(base: &ModelSpec, axes: &[GridAxis]) -> Result<Vec<(serde_json::Map<String, serde_json::Value>, ModelSpec)>> {
    let mut points = vec![(serde_json::Map::new(), base.clone())];
    for a in axes {
        if a.values.is_empty() {
            return Err(Error::BadConfig(format!("grid axis {} has no values", a.param)));
        }
        let mut next = Vec::with_capacity(points.len() * a.values.len());
        for (params, spec) in &points {
            for v in &a.values {
                let mut p = params.clone();
                p.insert(a.param.clone(), v.clone());
                next.push((p, spec.with_param(&a.param, v.clone())?));
            }
        }
        points = next;
    }
    Ok(points)
}

/// Exhaustive search scored by CV R²; ties keep the earlier grid point.
pub fn grid_search(
    base: &ModelSpec,
    axes: &[GridAxis],
    x: &Matrix,
    y: &[f64],
    k: usize,
    seed: u64,
    pooled: bool,
) -> Result<GridOutcome> {
    let mut table: Vec<GridRow> = Vec::new();
    let mut best_index = 0;
    for (i, (params, spec)) in expand_grid(base, axes)?.into_iter().enumerate() {
        let cv = kfold_cv(&spec, x, y, k, seed, pooled)?;
        if i > 0 && cv.r2 > table[best_index].cv.r2 {
            best_index = i;
        }
        table.push(GridRow { params, spec, cv });
    }
    Ok(GridOutcome { best: table[best_index].spec.clone(), best_index, table })
}
