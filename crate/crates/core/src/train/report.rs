use std::path::Path;

use moldline_nn::train::LossPoint;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

use super::cv::CvSummary;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitInfo {
    pub n_train: usize,
    pub n_test: usize,
    pub seed: u64,
}

/// One trained model on one input regime.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub kind: String,
    /// `signals`, `thermo`, `both`, or `images` / `raw_signals` for the
    /// neural models.
    pub regime: String,
    pub hyperparameters: serde_json::Value,
    pub seed: u64,
    pub split: SplitInfo,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manifest_hash: Option<String>,
    pub data_hash: String,
    pub n_features: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub selected_features: Vec<String>,
    /// File holding the loss trajectory, when one was written.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loss_trajectory: Option<String>,
    /// Test-split MSE in standardized target units.
    pub mse: f64,
    pub r2: f64,
    /// Cross-validation on the training rows, when run.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cv: Option<CvSummary>,
    pub seconds: f64,
    pub decisions: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<String>,
    #[serde(skip)]
    pub trajectory: Vec<LossPoint>,
}

impl TrainReport {
    pub fn score_row(&self) -> ScoreRow {
        ScoreRow {
            model: self.kind.clone(),
            regime: self.regime.clone(),
            n_features: self.n_features,
            mse: self.mse,
            r2: self.r2,
            seconds: self.seconds,
            seed: self.seed,
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)? + "\n";
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

/// One line of `scores.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub model: String,
    pub regime: String,
    pub n_features: usize,
    pub mse: f64,
    pub r2: f64,
    pub seconds: f64,
    pub seed: u64,
}

pub fn write_scores_csv(path: &Path, rows: &[ScoreRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::BadConfig(format!("{}: {e}", path.display())))?;
    // The header is written explicitly so an empty table still has one.
    w.write_record(["model", "regime", "n_features", "mse", "r2", "seconds", "seed"])?;
    for r in rows {
        w.write_record([
            r.model.clone(),
            r.regime.clone(),
            r.n_features.to_string(),
            r.mse.to_string(),
            r.r2.to_string(),
            r.seconds.to_string(),
            r.seed.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_scores_csv(path: &Path) -> Result<Vec<ScoreRow>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut r = csv::Reader::from_reader(bytes.as_slice());
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

/// `train_log.csv`: iteration, loss.
pub fn write_train_log(path: &Path, trajectory: &[LossPoint]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::BadConfig(format!("{}: {e}", path.display())))?;
    w.write_record(["iteration", "loss"])?;
    for p in trajectory {
        w.write_record([p.iteration.to_string(), p.loss.to_string()])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
