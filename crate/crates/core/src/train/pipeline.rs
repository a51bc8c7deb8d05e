use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::descriptors::FeatureMatrix;
use crate::featsel::{rfe, RfePoint};
use crate::linalg::Matrix;
use crate::preprocess::{ColumnScaler, Standardizer};
use crate::regress::Regressor;
use crate::{Error, Result};

use super::config::SelectConfig;

/// Every statistic a descriptor model learns from data besides the model
/// itself. Fitted from training rows only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedStats {
    /// Input columns, by descriptor name.
    pub columns: Vec<String>,
    pub scaler: ColumnScaler,
    pub target: Standardizer,
    /// Positions in `columns` kept by feature selection, ascending.
    pub selected: Vec<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub rfe_curve: Vec<RfePoint>,
    #[serde(default)]
    pub flags: Vec<String>,
}

impl FittedStats {
    /// Fit the scaler and target standardizer, then (when enabled) run RFE
    /// on the scaled training data.
    pub fn fit(x_train: &Matrix, columns: &[String], y_train: &[f64], select: &SelectConfig, seed: u64) -> Result<Self> {
        if columns.len() != x_train.cols() {
            return Err(Error::Shape(format!("{} names for {} columns", columns.len(), x_train.cols())));
        }
        let scaler = ColumnScaler::fit(x_train)?;
        let target = Standardizer::fit(y_train)?;
        let mut flags = Vec::new();
        let (selected, rfe_curve) = if select.enabled && x_train.cols() > 1 {
            let z = scaler.apply(x_train)?;
            let out = rfe(&z, columns, &target.apply(y_train)?, select.cv_folds, seed)?;
            if out.ridge_fallback {
                flags.push("rfe_ridge_fallback".to_string());
            }
            (out.selected, out.curve)
        } else {
            ((0..columns.len()).collect(), Vec::new())
        };
        Ok(Self { columns: columns.to_vec(), scaler, target, selected, rfe_curve, flags })
    }

    pub fn selected_names(&self) -> Vec<String> {
        self.selected.iter().map(|&i| self.columns[i].clone()).collect()
    }

    /// Scale, impute and select. `x` has the columns of `self.columns`.
    pub fn transform(&self, x: &Matrix) -> Result<Matrix> {
        Ok(self.scaler.apply(x)?.select_cols(&self.selected))
    }
}

pub const DESCRIPTOR_MODEL_FORMAT: &str = "moldline-descriptor-model";

/// A fitted regressor with its preprocessing, as written by `train`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescriptorModel {
    pub format: String,
    pub version: u32,
    pub regime: String,
    pub manifest_hash: String,
    pub stats: FittedStats,
    pub regressor: Regressor,
}

impl DescriptorModel {
    pub fn new(regime: &str, manifest_hash: String, stats: FittedStats, regressor: Regressor) -> Self {
        Self { format: DESCRIPTOR_MODEL_FORMAT.into(), version: 1, regime: regime.into(), manifest_hash, stats, regressor }
    }

    /// Predictions in standardized target units.
    pub fn predict_z(&self, fm: &FeatureMatrix) -> Result<Vec<f64>> {
        let x = fm.select_named(&self.stats.columns)?;
        self.regressor.predict(&self.stats.transform(&x.values)?)
    }

    /// Predicted widths in millimetres.
    pub fn predict(&self, fm: &FeatureMatrix) -> Result<Vec<f64>> {
        self.stats.target.inverse(&self.predict_z(fm)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: Self = serde_json::from_str(text)?;
        if m.format != DESCRIPTOR_MODEL_FORMAT || m.version != 1 {
            return Err(Error::BadConfig(format!("unsupported model file {} v{}", m.format, m.version)));
        }
        Ok(m)
    }
}

/// Refit the statistics on a physically reduced copy holding only the
/// training rows and compare them with `stats`, which the harness fitted
/// from the full matrix via the split. Any difference is leakage.
pub fn leakage_check(
    stats: &FittedStats,
    x_all: &Matrix,
    y_all: &[f64],
    train: &[usize],
    select: &SelectConfig,
    seed: u64,
) -> Result<()> {
    let x: Vec<Vec<f64>> = train.iter().map(|&i| x_all.row(i).to_vec()).collect();
    let y: Vec<f64> = train.iter().map(|&i| y_all[i]).collect();
    let reduced = Matrix::from_rows(&x)?;
    let again = FittedStats::fit(&reduced, &stats.columns, &y, select, seed)?;
    if &again != stats {
        return Err(Error::Leakage("preprocessing statistics change when test rows are deleted".into()));
    }
    Ok(())
}

/// SHA-256 over the bit patterns of a design matrix and its targets.
pub fn data_hash(x: &Matrix, y: &[f64]) -> String {
    let mut h = Sha256::new();
    h.update((x.rows() as u64).to_le_bytes());
    h.update((x.cols() as u64).to_le_bytes());
    for v in x.data().iter().chain(y) {
        h.update(v.to_bits().to_le_bytes());
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// SHA-256 over every record's traces, image and label bit patterns.
pub fn records_hash(records: &[crate::dataset::CycleRecord], y: &[f64]) -> String {
    let mut h = Sha256::new();
    for (r, label) in records.iter().zip(y) {
        h.update(r.cycle_id.as_bytes());
        for t in &r.traces {
            h.update((t.samples.len() as u64).to_le_bytes());
            for v in &t.samples {
                h.update(v.to_bits().to_le_bytes());
            }
        }
        for v in &r.image.pixels {
            h.update(v.to_bits().to_le_bytes());
        }
        h.update(label.to_bits().to_le_bytes());
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}
