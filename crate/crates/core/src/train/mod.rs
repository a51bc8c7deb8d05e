//! Training orchestration: leakage-guarded preprocessing, cross-validation,
//! grid search, neural adapters, model comparison and run reports.

mod compare;
mod config;
mod cv;
mod neural;
mod pipeline;
mod report;

pub use compare::{
    compare_all, ranking_table, run_descriptor_model, run_model, run_neural_model, with_spec, Comparison, RunArtifacts,
    TrainData, TrainedModel,
};
pub use config::{GridAxis, NeuralConfig, Regime, SelectConfig, TrainConfig, REGIMES};
pub use cv::{expand_grid, grid_search, kfold_cv, CvSummary, GridOutcome, GridRow};
pub use neural::{
    fit_neural, frame_signals, image_tensor, is_neural_kind, signal_tensor, ImagePrep, NeuralFit, NeuralModel, NeuralPrep,
    SavedNeural, SignalPrep, NEURAL_KINDS,
};
pub use pipeline::{data_hash, leakage_check, records_hash, DescriptorModel, FittedStats};
pub use report::{read_scores_csv, write_scores_csv, write_train_log, ScoreRow, SplitInfo, TrainReport};

use crate::regress::KINDS;

/// Every model kind accepted by the harness.
pub fn all_kinds() -> Vec<String> {
    KINDS.iter().chain(NEURAL_KINDS.iter()).map(|s| s.to_string()).collect()
}
