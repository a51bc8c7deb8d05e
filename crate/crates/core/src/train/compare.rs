use std::path::Path;
use std::sync::Mutex;
use std::time::Instant;

use serde_json::json;

use crate::dataset::{CycleRecord, Split};
use crate::descriptors::FeatureMatrix;
use crate::regress::{score, ModelSpec, Regressor};
use crate::{Error, Result};

use super::config::{Regime, TrainConfig};
use super::cv::{grid_search, kfold_cv};
use super::neural::{fit_neural, is_neural_kind, SavedNeural};
use super::pipeline::{data_hash, leakage_check, records_hash, DescriptorModel, FittedStats};
use super::report::{SplitInfo, TrainReport};

/// Inputs of a training run. Descriptor models need `features`, neural
/// models need `records`; rows of both align with `labels`.
#[derive(Debug, Clone)]
pub struct TrainData {
    pub features: Option<FeatureMatrix>,
    pub records: Option<Vec<CycleRecord>>,
    pub labels: Vec<f64>,
    pub split: Split,
    pub split_seed: u64,
}

impl TrainData {
    fn split_info(&self) -> SplitInfo {
        SplitInfo { n_train: self.split.train.len(), n_test: self.split.test.len(), seed: self.split_seed }
    }

    fn check(&self) -> Result<()> {
        let n = self.labels.len();
        if let Some(fm) = &self.features {
            if fm.values.rows() != n {
                return Err(Error::Shape(format!("{} feature rows for {n} labels", fm.values.rows())));
            }
        }
        if let Some(r) = &self.records {
            if r.len() != n {
                return Err(Error::Shape(format!("{} records for {n} labels", r.len())));
            }
        }
        if self.split.train.iter().chain(&self.split.test).any(|&i| i >= n) {
            return Err(Error::Shape("split indexes past the data".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub enum TrainedModel {
    Descriptor(DescriptorModel),
    Neural(SavedNeural),
}

impl TrainedModel {
    pub fn save(&self, path: &Path) -> Result<()> {
        match self {
            TrainedModel::Descriptor(m) => m.save(path),
            TrainedModel::Neural(m) => m.save(path),
        }
    }

    /// Read either model file format.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let v: serde_json::Value = serde_json::from_str(&text)?;
        match v.get("format").and_then(|f| f.as_str()) {
            Some(super::pipeline::DESCRIPTOR_MODEL_FORMAT) => Ok(TrainedModel::Descriptor(DescriptorModel::from_json(&text)?)),
            Some(super::neural::NEURAL_MODEL_FORMAT) => Ok(TrainedModel::Neural(SavedNeural::from_json(&text)?)),
            other => Err(Error::BadConfig(format!("{}: unknown model format {other:?}", path.display()))),
        }
    }
}

pub struct RunArtifacts {
    pub report: TrainReport,
    pub model: TrainedModel,
}

fn merge_flags(into: &mut Vec<String>, from: &[String]) {
    for f in from {
        if !into.contains(f) {
            into.push(f.clone());
        }
    }
}

/// Fit one descriptor model on one regime: training-row statistics and
/// feature selection, optional grid search, final fit, test scoring.
pub fn run_descriptor_model(data: &TrainData, kind: &str, regime: Regime, cfg: &TrainConfig) -> Result<RunArtifacts> {
    data.check()?;
    let fm = data.features.as_ref().ok_or_else(|| Error::BadConfig("descriptor models need a feature matrix".into()))?;
    let start = Instant::now();
    let seed = cfg.seed;
    let y = &data.labels;
    let cols = regime.columns(&fm.manifest);
    if cols.is_empty() {
        return Err(Error::BadConfig(format!("no {regime} descriptors in the feature matrix")));
    }
    let sub = fm.select_columns(&cols);
    let names = sub.manifest.names();
    let train = &data.split.train;
    let test = &data.split.test;
    let ytr: Vec<f64> = train.iter().map(|&i| y[i]).collect();
    let yte: Vec<f64> = test.iter().map(|&i| y[i]).collect();
    let xtr = sub.values.select_rows(train);

    let stats = FittedStats::fit(&xtr, &names, &ytr, &cfg.select, seed)?;
    let mut decisions = vec![
        "descriptors standardized with training-row statistics; missing entries imputed by the training mean".to_string(),
        "target standardized with training-row statistics; MSE in standardized units".to_string(),
    ];
    if cfg.select.enabled {
        decisions.push(format!("RFE on training rows: {} of {} descriptors kept", stats.selected.len(), names.len()));
    }
    if cfg.leakage_guard {
        leakage_check(&stats, &sub.values, y, train, &cfg.select, seed)?;
        decisions.push("leakage guard passed".to_string());
    }
    let mut flags = stats.flags.clone();
    let selected_raw = xtr.select_cols(&stats.selected);

    let base = cfg.spec_for(kind)?;
    let grid = if cfg.tune { cfg.grids.get(kind).filter(|a| !a.is_empty()) } else { None };
    let (spec, cv) = match grid {
        Some(axes) => {
            let g = grid_search(&base, axes, &selected_raw, &ytr, cfg.cv_folds, seed, cfg.pooled_cv)?;
            decisions.push(format!(
                "grid search over {} points, best {}",
                g.table.len(),
                serde_json::Value::Object(g.table[g.best_index].params.clone())
            ));
            let cv = g.table[g.best_index].cv.clone();
            (g.best, cv)
        }
        None => {
            let cv = kfold_cv(&base, &selected_raw, &ytr, cfg.cv_folds, seed, cfg.pooled_cv)?;
            (base, cv)
        }
    };

    let mut model = Regressor::new(spec.clone(), seed);
    model.fit(&stats.transform(&xtr)?, &stats.target.apply(&ytr)?)?;
    merge_flags(&mut flags, &model.flags);
    let pred = model.predict(&stats.transform(&sub.values.select_rows(test))?)?;
    let scores = score(&pred, &stats.target.apply(&yte)?)?;

    let report = TrainReport {
        kind: kind.to_string(),
        regime: regime.name().to_string(),
        hyperparameters: serde_json::to_value(&spec)?,
        seed,
        split: data.split_info(),
        manifest_hash: Some(fm.manifest.hash()),
        data_hash: data_hash(&sub.values, y),
        n_features: stats.selected.len(),
        selected_features: stats.selected_names(),
        loss_trajectory: None,
        mse: scores.mse,
        r2: scores.r2,
        cv: Some(cv),
        seconds: start.elapsed().as_secs_f64(),
        decisions,
        flags,
        trajectory: Vec::new(),
    };
    let model = DescriptorModel::new(regime.name(), fm.manifest.hash(), stats, model);
    Ok(RunArtifacts { report, model: TrainedModel::Descriptor(model) })
}

/// Train one neural kind on the raw images or signals and score it on the
/// test rows.
pub fn run_neural_model(data: &TrainData, kind: &str, cfg: &TrainConfig, iterations: usize) -> Result<RunArtifacts> {
    data.check()?;
    let records = data.records.as_ref().ok_or_else(|| Error::BadConfig("neural models need the dataset records".into()))?;
    let start = Instant::now();
    let fit = fit_neural(kind, records, &data.labels, &data.split.train, cfg, cfg.seed, iterations)?;
    let mut model = fit.model;
    let test: Vec<&CycleRecord> = data.split.test.iter().map(|&i| &records[i]).collect();
    let yte: Vec<f64> = data.split.test.iter().map(|&i| data.labels[i]).collect();
    let pred = model.predict_z(&test)?;
    let scores = score(&pred, &model.target.apply(&yte)?)?;
    let signal = kind.starts_with("lstm");
    let nc = &cfg.neural;
    let hyper = if signal {
        json!({"iterations": iterations, "batch_size": nc.batch_size, "l2": nc.lstm_l2, "hidden": nc.lstm_hidden,
               "framing": nc.framing, "signal_len": nc.signal_len, "clip_norm": nc.lstm_clip_norm})
    } else {
        json!({"iterations": iterations, "batch_size": nc.batch_size, "l2": nc.l2, "arch": nc.arch, "image_side": nc.image_side})
    };
    let n_features = match &model.prep {
        super::NeuralPrep::Image(p) => p.side * p.side,
        super::NeuralPrep::Signal(p) => p.len * crate::dataset::Channel::ALL.len(),
    };
    let report = TrainReport {
        kind: kind.to_string(),
        regime: if signal { "raw_signals" } else { "images" }.to_string(),
        hyperparameters: hyper,
        seed: cfg.seed,
        split: data.split_info(),
        manifest_hash: None,
        data_hash: records_hash(records, &data.labels),
        n_features,
        selected_features: Vec::new(),
        loss_trajectory: Some("train_log.csv".to_string()),
        mse: scores.mse,
        r2: scores.r2,
        cv: None,
        seconds: start.elapsed().as_secs_f64(),
        decisions: fit.decisions,
        flags: Vec::new(),
        trajectory: fit.trajectory,
    };
    Ok(RunArtifacts { report, model: TrainedModel::Neural(model) })
}

/// Run a single kind: descriptor kinds on one regime, neural kinds on raw
/// inputs with the configured iteration count.
pub fn run_model(data: &TrainData, kind: &str, regime: Regime, cfg: &TrainConfig) -> Result<RunArtifacts> {
    if is_neural_kind(kind) {
        run_neural_model(data, kind, cfg, cfg.iterations_for(kind))
    } else {
        run_descriptor_model(data, kind, regime, cfg)
    }
}

#[derive(Debug, Clone)]
pub struct Comparison {
    /// Sorted by test R², best first; ties keep run order.
    pub reports: Vec<TrainReport>,
    /// Fitted models, aligned with `reports`.
    pub models: Vec<TrainedModel>,
    pub warnings: Vec<String>,
}

/// Every enabled descriptor model on every configured regime, then every
/// enabled neural model. Runs are independent and use up to `cfg.jobs`
/// threads; results do not depend on the thread count.
pub fn compare_all(data: &TrainData, cfg: &TrainConfig) -> Result<Comparison> {
    cfg.validate()?;
    let mut jobs: Vec<(String, Regime)> = Vec::new();
    for kind in &cfg.models {
        for &r in &cfg.regimes {
            jobs.push((kind.clone(), r));
        }
    }
    for kind in &cfg.neural_models {
        jobs.push((kind.clone(), Regime::Both));
    }
    let mut warnings = Vec::new();
    if jobs.is_empty() {
        warnings.push("no models enabled; nothing to compare".to_string());
        return Ok(Comparison { reports: Vec::new(), models: Vec::new(), warnings });
    }
    let results: Vec<Mutex<Option<Result<RunArtifacts>>>> = jobs.iter().map(|_| Mutex::new(None)).collect();
    let next = Mutex::new(0usize);
    std::thread::scope(|s| {
        for _ in 0..cfg.jobs.min(jobs.len()) {
            s.spawn(|| loop {
                let i = {
                    let mut n = next.lock().expect("job counter");
                    let i = *n;
                    *n += 1;
                    i
                };
                let Some((kind, regime)) = jobs.get(i) else { break };
                let out = run_model(data, kind, *regime, cfg);
                *results[i].lock().expect("result slot") = Some(out);
            });
        }
    });
    let mut runs = Vec::with_capacity(jobs.len());
    for slot in results {
        runs.push(slot.into_inner().expect("result slot").expect("every job ran")?);
    }
    runs.sort_by(|a, b| b.report.r2.total_cmp(&a.report.r2));
    let (reports, models) = runs.into_iter().map(|a| (a.report, a.model)).unzip();
    Ok(Comparison { reports, models, warnings })
}

/// A plain-text ranking table of reports.
pub fn ranking_table(reports: &[TrainReport]) -> String {
    let mut out = format!("{:<4} {:<14} {:<12} {:>6} {:>10} {:>8}\n", "rank", "model", "regime", "feats", "mse", "r2");
    for (i, r) in reports.iter().enumerate() {
        out.push_str(&format!(
            "{:<4} {:<14} {:<12} {:>6} {:>10.4} {:>8.4}\n",
            i + 1,
            r.kind,
            r.regime,
            r.n_features,
            r.mse,
            r.r2
        ));
    }
    out
}

/// Convenience for callers holding a `ModelSpec` outside the config.
pub fn with_spec(cfg: &TrainConfig, spec: ModelSpec) -> TrainConfig {
    let mut c = cfg.clone();
    c.params.insert(spec.kind().to_string(), spec);
    c
}
