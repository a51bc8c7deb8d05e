//! Descriptor correlation analysis and recursive feature elimination scored
//! by cross-validated least-squares R².

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::folds;
use crate::linalg::{mean, Matrix};
use crate::regress::linear::fit_ols;
use crate::regress::score;
use crate::{Error, Result};

pub const DEFAULT_CORRELATION_THRESHOLD: f64 = 0.95;
pub const DEFAULT_CV_FOLDS: usize = 5;

/// Two scores closer than this (relative) are treated as tied.
const TIE: f64 = 1e-12;

fn tied(a: f64, b: f64) -> bool {
    (a - b).abs() <= TIE * a.abs().max(b.abs()).max(1.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    pub names: Vec<String>,
    pub values: Matrix,
    /// Columns with zero variance; their off-diagonal entries are 0.
    pub constant: Vec<bool>,
}

/// Pearson correlations between columns. NaN entries are replaced by the
/// column mean of the remaining values first.
pub fn correlation_matrix(x: &Matrix, names: &[String]) -> Result<CorrelationMatrix> {
    if x.rows() < 2 {
        return Err(Error::TooFewValues { got: x.rows(), need: 2 });
    }
    if names.len() != x.cols() {
        return Err(Error::Shape(format!("{} names for {} columns", names.len(), x.cols())));
    }
    let n = x.rows() as f64;
    let mut cols = x.columns();
    let mut norms = Vec::with_capacity(cols.len());
    for col in cols.iter_mut() {
        let finite: Vec<f64> = col.iter().copied().filter(|v| !v.is_nan()).collect();
        let m = if finite.is_empty() { 0.0 } else { mean(&finite) };
        for v in col.iter_mut() {
            *v = if v.is_nan() { 0.0 } else { *v - m };
        }
        norms.push((col.iter().map(|v| v * v).sum::<f64>() / n).sqrt());
    }
    let p = cols.len();
    let constant: Vec<bool> = norms.iter().map(|&s| s == 0.0).collect();
    let mut values = Matrix::zeros(p, p);
    for i in 0..p {
        values.set(i, i, 1.0);
        for j in i + 1..p {
            let r = if constant[i] || constant[j] {
                0.0
            } else {
                let c = cols[i].iter().zip(&cols[j]).map(|(a, b)| a * b).sum::<f64>() / n;
                (c / (norms[i] * norms[j])).clamp(-1.0, 1.0)
            };
            values.set(i, j, r);
            values.set(j, i, r);
        }
    }
    Ok(CorrelationMatrix { names: names.to_vec(), values, constant })
}

/// Number of features with `|r| ≥ threshold` against at least one other
/// feature.
pub fn count_correlated(cm: &CorrelationMatrix, threshold: f64) -> usize {
    let p = cm.values.rows();
    (0..p).filter(|&i| (0..p).any(|j| j != i && cm.values.get(i, j).abs() >= threshold)).count()
}

pub fn write_correlation_csv(path: &Path, cm: &CorrelationMatrix) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_io(path, e))?;
    let mut header = vec![String::new()];
    header.extend(cm.names.iter().cloned());
    w.write_record(&header)?;
    for (i, name) in cm.names.iter().enumerate() {
        let mut row = vec![name.clone()];
        row.extend(cm.values.row(i).iter().map(|v| v.to_string()));
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn csv_io(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::BadConfig(format!("{}: {other:?}", path.display())),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RfePoint {
    pub n_features: usize,
    pub mean_r2: f64,
    /// Population standard deviation of the per-fold R².
    pub std_r2: f64,
    /// Feature dropped after scoring this cardinality (none at the last).
    pub dropped: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RfeOutcome {
    /// One point per cardinality, from all features down to one.
    pub curve: Vec<RfePoint>,
    /// Selected column indices in input order.
    pub selected: Vec<usize>,
    pub selected_names: Vec<String>,
    pub best_r2: f64,
    /// Some least-squares fit needed the ridge fallback.
    pub ridge_fallback: bool,
}

/// Absolute standardized OLS coefficients of the given columns. Constant
/// columns get 0 and stay out of the fit.
fn standardized_importance(x: &Matrix, y: &[f64], cols: &[usize]) -> Result<(Vec<f64>, bool)> {
    let n = x.rows() as f64;
    let mut data = Vec::new();
    let mut live = Vec::new();
    for (k, &j) in cols.iter().enumerate() {
        let col = x.column(j);
        let m = mean(&col);
        let s = (col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n).sqrt();
        if s > 0.0 {
            live.push(k);
            data.push(col.iter().map(|v| (v - m) / s).collect::<Vec<_>>());
        }
    }
    let mut imp = vec![0.0; cols.len()];
    if live.is_empty() {
        return Ok((imp, false));
    }
    let z = Matrix::from_columns(&data)?;
    let (model, ridged) = fit_ols(&z, y)?;
    for (k, c) in live.iter().zip(model.coef) {
        imp[*k] = c.abs();
    }
    Ok((imp, ridged))
}

fn cv_r2(x: &Matrix, y: &[f64], cols: &[usize], fold_rows: &[Vec<usize>]) -> Result<(f64, f64, bool)> {
    let sub = x.select_cols(cols);
    let mut scores = Vec::with_capacity(fold_rows.len());
    let mut ridged = false;
    for held in fold_rows {
        let train: Vec<usize> = (0..x.rows()).filter(|i| held.binary_search(i).is_err()).collect();
        let ytr: Vec<f64> = train.iter().map(|&i| y[i]).collect();
        let (model, r) = fit_ols(&sub.select_rows(&train), &ytr)?;
        ridged |= r;
        let pred = model.predict(&sub.select_rows(held));
        let truth: Vec<f64> = held.iter().map(|&i| y[i]).collect();
        scores.push(score(&pred, &truth)?.r2);
    }
    let m = mean(&scores);
    let sd = (scores.iter().map(|s| (s - m) * (s - m)).sum::<f64>() / scores.len() as f64).sqrt();
    Ok((m, sd, ridged))
}

/// Recursive feature elimination, one feature per round. At every
/// cardinality the current subset is scored by `cv_folds`-fold CV R² of
/// OLS, then the feature with the smallest absolute standardized
/// coefficient (ties to the lexicographically first name) is dropped. The
/// best subset maximizes mean CV R², ties going to the smaller subset.
pub fn rfe(x: &Matrix, names: &[String], y: &[f64], cv_folds: usize, seed: u64) -> Result<RfeOutcome> {
    if names.len() != x.cols() || y.len() != x.rows() {
        return Err(Error::Shape(format!("{}x{} features, {} names, {} targets", x.rows(), x.cols(), names.len(), y.len())));
    }
    if x.cols() == 0 {
        return Err(Error::BadDims("no features to select from".into()));
    }
    if x.rows() < cv_folds + 1 {
        return Err(Error::TooFewValues { got: x.rows(), need: cv_folds + 1 });
    }
    if x.data().iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::BadConfig("feature selection needs finite, imputed inputs".into()));
    }
    let fold_rows = folds(x.rows(), cv_folds, seed, "rfe-folds")?;
    let mut current: Vec<usize> = (0..x.cols()).collect();
    let mut curve = Vec::with_capacity(x.cols());
    let mut subsets = Vec::with_capacity(x.cols());
    let mut ridge_fallback = false;
    loop {
        let (m, sd, r) = cv_r2(x, y, &current, &fold_rows)?;
        ridge_fallback |= r;
        subsets.push(current.clone());
        if current.len() == 1 {
            curve.push(RfePoint { n_features: 1, mean_r2: m, std_r2: sd, dropped: None });
            break;
        }
        let (imp, r) = standardized_importance(x, y, &current)?;
        ridge_fallback |= r;
        let mut worst = 0;
        for k in 1..current.len() {
            let better = if tied(imp[k], imp[worst]) { names[current[k]] < names[current[worst]] } else { imp[k] < imp[worst] };
            if better {
                worst = k;
            }
        }
        let dropped = current.remove(worst);
        curve.push(RfePoint {
            n_features: subsets.last().map_or(0, Vec::len),
            mean_r2: m,
            std_r2: sd,
            dropped: Some(names[dropped].clone()),
        });
    }
    let mut best = 0;
    for (k, p) in curve.iter().enumerate().skip(1) {
        // Later points are smaller subsets, so a tie moves to them.
        if p.mean_r2 > curve[best].mean_r2 || tied(p.mean_r2, curve[best].mean_r2) {
            best = k;
        }
    }
    let mut selected = subsets[best].clone();
    selected.sort_unstable();
    Ok(RfeOutcome {
        selected_names: selected.iter().map(|&j| names[j].clone()).collect(),
        best_r2: curve[best].mean_r2,
        selected,
        curve,
        ridge_fallback,
    })
}

/// `rfe_curve.csv`: cardinality, mean R², std R², dropped feature.
pub fn write_rfe_curve_csv(path: &Path, outcome: &RfeOutcome) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_io(path, e))?;
    w.write_record(["n_features", "mean_r2", "std_r2", "dropped"])?;
    for p in &outcome.curve {
        w.write_record([
            p.n_features.to_string(),
            p.mean_r2.to_string(),
            p.std_r2.to_string(),
            p.dropped.clone().unwrap_or_default(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
