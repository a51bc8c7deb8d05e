use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use moldline_nn::arch::ArchConfig;
use moldline_nn::lstm::Framing;
use serde::{Deserialize, Serialize};

use crate::descriptors::{DescriptorManifest, DescriptorSource, ExtractConfig};
use crate::featsel::{DEFAULT_CORRELATION_THRESHOLD, DEFAULT_CV_FOLDS};
use crate::regress::{ModelSpec, KINDS};
use crate::synth::SynthConfig;
use crate::{Error, Result};

/// Which descriptor columns a model sees.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// Raw-signal and CWT-peak descriptors.
    Signals,
    /// Thermal-image descriptors.
    Thermo,
    Both,
}

pub const REGIMES: [Regime; 3] = [Regime::Signals, Regime::Thermo, Regime::Both];

impl Regime {
    pub fn name(self) -> &'static str {
        match self {
            Regime::Signals => "signals",
            Regime::Thermo => "thermo",
            Regime::Both => "both",
        }
    }

    pub fn sources(self) -> &'static [DescriptorSource] {
        match self {
            Regime::Signals => &[DescriptorSource::SignalRaw, DescriptorSource::SignalCwtPeaks],
            Regime::Thermo => &[DescriptorSource::Image],
            Regime::Both => &[DescriptorSource::SignalRaw, DescriptorSource::SignalCwtPeaks, DescriptorSource::Image],
        }
    }

    pub fn columns(self, manifest: &DescriptorManifest) -> Vec<usize> {
        manifest.indices_of(self.sources())
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SelectConfig {
    pub enabled: bool,
    pub cv_folds: usize,
    pub correlation_threshold: f64,
}

impl Default for SelectConfig {
    fn default() -> Self {
        Self { enabled: true, cv_folds: DEFAULT_CV_FOLDS, correlation_threshold: DEFAULT_CORRELATION_THRESHOLD }
    }
}

/// One hyperparameter axis; axes expand in declared order, the first axis
/// varying slowest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridAxis {
    pub param: String,
    pub values: Vec<serde_json::Value>,
}

fn axis(param: &str, values: serde_json::Value) -> GridAxis {
    GridAxis { param: param.to_string(), values: values.as_array().expect("array literal").clone() }
}

fn default_grids() -> BTreeMap<String, Vec<GridAxis>> {
    use serde_json::json;
    let mut g = BTreeMap::new();
    g.insert("lasso".into(), vec![axis("l1", json!([0.03162, 0.1, 0.3162, 1.0]))]);
    g.insert(
        "elastic_net".into(),
        vec![axis("l1", json!([0.00023, 0.0023, 0.023])), axis("l2", json!([0.00033, 0.0033, 0.033]))],
    );
    g.insert("linear_svr".into(), vec![axis("c", json!([0.1, 1.0, 10.0]))]);
    g.insert("knn".into(), vec![axis("k", json!([1, 2, 3, 5, 8]))]);
    g.insert("sgd".into(), vec![axis("eta0", json!([0.001, 0.01, 0.1]))]);
    g.insert("tree".into(), vec![axis("max_depth", json!([1, 3, 5]))]);
    g.insert("bagging".into(), vec![axis("n_estimators", json!([10, 30]))]);
    g.insert("random_forest".into(), vec![axis("n_estimators", json!([50, 100]))]);
    g.insert("gbm".into(), vec![axis("learning_rate", json!([0.05, 0.1, 0.2]))]);
    g.insert("adaboost".into(), vec![axis("n_estimators", json!([100, 300]))]);
    g
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NeuralConfig {
    pub arch: ArchConfig,
    pub batch_size: usize,
    /// L2 penalty of the image networks.
    pub l2: f64,
    /// L2 penalty of the LSTMs.
    pub lstm_l2: f64,
    pub log_every: usize,
    /// Training iterations per neural kind.
    pub iterations: BTreeMap<String, usize>,
    pub image_side: usize,
    pub lstm_hidden: usize,
    /// Every trace is resampled to this many samples before framing.
    pub signal_len: usize,
    pub framing: Framing,
    pub lstm_clip_norm: f64,
}

impl Default for NeuralConfig {
    fn default() -> Self {
        let iterations = [
            ("mlp_2fc", 10_000),
            ("cnn1_fc1", 10_000),
            ("cnn2_fc1", 10_000),
            ("cnn2_fc2", 10_000),
            ("cnn3_fc2", 100_000),
            ("lstm1", 100_000),
            ("lstm2", 100_000),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
        Self {
            arch: ArchConfig::default(),
            batch_size: 17,
            l2: 0.01,
            lstm_l2: 0.0,
            log_every: 100,
            iterations,
            image_side: 28,
            lstm_hidden: 30,
            signal_len: 3000,
            framing: Framing::Windows { size: 30 },
            lstm_clip_norm: 5.0,
        }
    }
}

/// The single run configuration. Every field has a default; the shipped
/// `moldline.default.json` is `TrainConfig::default()` serialized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub seed: u64,
    pub synth: SynthConfig,
    pub extract: ExtractConfig,
    pub select: SelectConfig,
    pub cv_folds: usize,
    /// Aggregate CV R² from pooled out-of-fold residuals instead of the
    /// mean of per-fold scores.
    pub pooled_cv: bool,
    /// Descriptor model kinds run by `compare_all`.
    pub models: Vec<String>,
    pub regimes: Vec<Regime>,
    /// Neural kinds run by `compare_all`.
    pub neural_models: Vec<String>,
    /// Grid-search each descriptor model before the final fit.
    pub tune: bool,
    pub grids: BTreeMap<String, Vec<GridAxis>>,
    /// Per-kind overrides of the default hyperparameters.
    pub params: BTreeMap<String, ModelSpec>,
    pub neural: NeuralConfig,
    /// Refit the preprocessing statistics on a copy of the data with the
    /// test rows deleted and fail on any difference.
    pub leakage_guard: bool,
    pub jobs: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            synth: SynthConfig::default(),
            extract: ExtractConfig::default(),
            select: SelectConfig::default(),
            cv_folds: 5,
            pooled_cv: false,
            models: KINDS.iter().map(|s| s.to_string()).collect(),
            regimes: REGIMES.to_vec(),
            neural_models: super::NEURAL_KINDS.iter().map(|s| s.to_string()).collect(),
            tune: true,
            grids: default_grids(),
            params: BTreeMap::new(),
            neural: NeuralConfig::default(),
            leakage_guard: true,
            jobs: 1,
        }
    }
}

impl TrainConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::BadConfig(format!("{}: {e}", path.display())))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes") + "\n"
    }

    /// The configured spec for a descriptor model kind.
    pub fn spec_for(&self, kind: &str) -> Result<ModelSpec> {
        match self.params.get(kind) {
            Some(s) if s.kind() == kind => Ok(s.clone()),
            Some(s) => Err(Error::BadConfig(format!("params.{kind} holds a {} spec", s.kind()))),
            None => ModelSpec::default_for(kind),
        }
    }

    pub fn iterations_for(&self, kind: &str) -> usize {
        self.neural.iterations.get(kind).copied().unwrap_or(10_000)
    }

    pub fn validate(&self) -> Result<()> {
        let valid = super::all_kinds();
        for k in self.models.iter().chain(&self.neural_models) {
            if !valid.contains(k) {
                return Err(Error::UnknownModel { kind: k.clone(), valid });
            }
        }
        for k in &self.models {
            if super::is_neural_kind(k) {
                return Err(Error::BadConfig(format!("{k} belongs in neural_models")));
            }
        }
        for k in &self.neural_models {
            if !super::is_neural_kind(k) {
                return Err(Error::BadConfig(format!("{k} belongs in models")));
            }
        }
        if self.cv_folds < 2 || self.select.cv_folds < 2 {
            return Err(Error::BadConfig("cross-validation needs at least 2 folds".into()));
        }
        if self.jobs == 0 {
            return Err(Error::BadConfig("jobs must be at least 1".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips_and_validates() {
        let c = TrainConfig::default();
        c.validate().unwrap();
        let back: TrainConfig = serde_json::from_str(&c.to_json()).unwrap();
        assert_eq!(back, c);
        let partial: TrainConfig = serde_json::from_str(r#"{"seed": 3}"#).unwrap();
        assert_eq!(partial.seed, 3);
        assert_eq!(partial.models, c.models);
    }

    #[test]
    fn grids_name_real_params() {
        let c = TrainConfig::default();
        for (kind, axes) in &c.grids {
            let spec = c.spec_for(kind).unwrap();
            for a in axes {
                for v in &a.values {
                    spec.with_param(&a.param, v.clone()).unwrap();
                }
            }
        }
    }
}
