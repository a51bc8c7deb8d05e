//! Classical regressors behind one fit/predict contract.

pub mod ensemble;
pub mod knn;
pub mod linear;
pub mod tree;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::linalg::Matrix;
use crate::{Error, Result};
use ensemble::{AdaBoost, BoostLoss, Forest, Gbm};
use knn::KnnModel;
use linear::LinearModel;
use tree::{Tree, TreeParams};

pub const KINDS: [&str; 11] =
    ["ols", "lasso", "elastic_net", "linear_svr", "knn", "sgd", "tree", "bagging", "random_forest", "gbm", "adaboost"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct OlsParams {}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ElasticNetParams {
    pub l1: f64,
    pub l2: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl ElasticNetParams {
    pub fn lasso() -> Self {
        Self { l1: 0.3162, l2: 0.0, ..Self::default() }
    }
}

impl Default for ElasticNetParams {
    fn default() -> Self {
        Self { l1: 0.00023, l2: 0.00033, tol: 1e-8, max_iter: 10_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvrParams {
    pub c: f64,
    pub epsilon: f64,
    pub epochs: usize,
}

impl Default for SvrParams {
    fn default() -> Self {
        Self { c: 1.0, epsilon: 0.1, epochs: 10_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KnnParams {
    pub k: usize,
    /// Minkowski exponent.
    pub p: f64,
}

impl Default for KnnParams {
    fn default() -> Self {
        Self { k: 2, p: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SgdParams {
    pub l1: f64,
    pub l2: f64,
    pub epochs: usize,
    pub eta0: f64,
    pub power_t: f64,
}

impl Default for SgdParams {
    fn default() -> Self {
        Self { l1: 0.0001, l2: 0.00067, epochs: 5, eta0: 0.01, power_t: 0.25 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TreeSpec {
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
}

impl Default for TreeSpec {
    fn default() -> Self {
        Self { max_depth: Some(1), min_samples_split: 2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BaggingParams {
    pub n_estimators: usize,
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
}

impl Default for BaggingParams {
    fn default() -> Self {
        Self { n_estimators: 10, max_depth: None, min_samples_split: 2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestParams {
    pub n_estimators: usize,
    /// `None` tries every feature at every split.
    pub max_features: Option<usize>,
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    pub bootstrap: bool,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self { n_estimators: 100, max_features: None, max_depth: None, min_samples_split: 2, bootstrap: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GbmParams {
    pub n_stages: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub min_samples_split: usize,
}

impl Default for GbmParams {
    fn default() -> Self {
        Self { n_stages: 500, learning_rate: 0.1, max_depth: 4, min_samples_split: 2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdaBoostParams {
    pub n_estimators: usize,
    pub learning_rate: f64,
    pub loss: BoostLoss,
    pub max_depth: Option<usize>,
}

impl Default for AdaBoostParams {
    fn default() -> Self {
        Self { n_estimators: 300, learning_rate: 1.0, loss: BoostLoss::Linear, max_depth: Some(3) }
    }
}

/// Model kind plus its hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSpec {
    Ols(OlsParams),
    Lasso(ElasticNetParams),
    ElasticNet(ElasticNetParams),
    LinearSvr(SvrParams),
    Knn(KnnParams),
    Sgd(SgdParams),
    Tree(TreeSpec),
    Bagging(BaggingParams),
    RandomForest(ForestParams),
    Gbm(GbmParams),
    #[serde(rename = "adaboost")]
    AdaBoost(AdaBoostParams),
}

impl ModelSpec {
    /// The tuned defaults for `kind`.
    pub fn default_for(kind: &str) -> Result<Self> {
        Ok(match kind {
            "ols" => ModelSpec::Ols(OlsParams {}),
            "lasso" => ModelSpec::Lasso(ElasticNetParams::lasso()),
            "elastic_net" => ModelSpec::ElasticNet(ElasticNetParams::default()),
            "linear_svr" => ModelSpec::LinearSvr(SvrParams::default()),
            "knn" => ModelSpec::Knn(KnnParams::default()),
            "sgd" => ModelSpec::Sgd(SgdParams::default()),
            "tree" => ModelSpec::Tree(TreeSpec::default()),
            "bagging" => ModelSpec::Bagging(BaggingParams::default()),
            "random_forest" => ModelSpec::RandomForest(ForestParams::default()),
            "gbm" => ModelSpec::Gbm(GbmParams::default()),
            "adaboost" => ModelSpec::AdaBoost(AdaBoostParams::default()),
            _ => {
                return Err(Error::UnknownModel { kind: kind.to_string(), valid: KINDS.iter().map(|s| s.to_string()).collect() })
            }
        })
    }

    pub fn kind(&self) -> &'static str {
        match self {
            ModelSpec::Ols(_) => "ols",
            ModelSpec::Lasso(_) => "lasso",
            ModelSpec::ElasticNet(_) => "elastic_net",
            ModelSpec::LinearSvr(_) => "linear_svr",
            ModelSpec::Knn(_) => "knn",
            ModelSpec::Sgd(_) => "sgd",
            ModelSpec::Tree(_) => "tree",
            ModelSpec::Bagging(_) => "bagging",
            ModelSpec::RandomForest(_) => "random_forest",
            ModelSpec::Gbm(_) => "gbm",
            ModelSpec::AdaBoost(_) => "adaboost",
        }
    }

    /// Copy with one hyperparameter replaced, addressed by its JSON name.
    pub fn with_param(&self, name: &str, value: serde_json::Value) -> Result<Self> {
        let mut v = serde_json::to_value(self)?;
        let obj = v.as_object_mut().expect("specs serialize to objects");
        if name == "kind" || !obj.contains_key(name) {
            return Err(Error::BadConfig(format!("{} has no hyperparameter {name:?}", self.kind())));
        }
        obj.insert(name.to_string(), value);
        Ok(serde_json::from_value(v)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum FittedState {
    Linear(LinearModel),
    Knn(KnnModel),
    Tree(Tree),
    Forest(Forest),
    Gbm(Gbm),
    AdaBoost(AdaBoost),
}

impl FittedState {
    fn predict_row(&self, row: &[f64]) -> f64 {
        match self {
            FittedState::Linear(m) => m.predict_row(row),
            FittedState::Knn(m) => m.predict_row(row),
            FittedState::Tree(m) => m.predict_row(row),
            FittedState::Forest(m) => m.predict_row(row),
            FittedState::Gbm(m) => m.predict_row(row),
            FittedState::AdaBoost(m) => m.predict_row(row),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fitted {
    pub n_features: usize,
    pub state: FittedState,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Regressor {
    pub spec: ModelSpec,
    pub seed: u64,
    pub fitted: Option<Fitted>,
    /// Notes raised while fitting, such as a ridge fallback or a solver
    /// that hit its iteration cap.
    pub flags: Vec<String>,
}

pub const MODEL_FORMAT: &str = "moldline-regressor";
pub const MODEL_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    model: Regressor,
}

impl Regressor {
    pub fn new(spec: ModelSpec, seed: u64) -> Self {
        Regressor { spec, seed, fitted: None, flags: Vec::new() }
    }

    pub fn is_fitted(&self) -> bool {
        self.fitted.is_some()
    }

    pub fn fit(&mut self, x: &Matrix, y: &[f64]) -> Result<()> {
        if x.rows() != y.len() {
            return Err(Error::Shape(format!("{} rows but {} targets", x.rows(), y.len())));
        }
        if let Some(bad) = x.data().iter().chain(y).find(|v| !v.is_finite()) {
            return Err(Error::BadConfig(format!("non-finite training value {bad}")));
        }
        let mut flags = Vec::new();
        let seed = self.seed;
        let state = match &self.spec {
            ModelSpec::Ols(_) => {
                let (m, ridged) = linear::fit_ols(x, y)?;
                if ridged {
                    flags.push("ridge_fallback".to_string());
                }
                FittedState::Linear(m)
            }
            ModelSpec::Lasso(p) | ModelSpec::ElasticNet(p) => {
                let out = linear::fit_coordinate_descent(x, y, p.l1, p.l2, p.tol, p.max_iter)?;
                if !out.converged {
                    flags.push("not_converged".to_string());
                }
                FittedState::Linear(out.model)
            }
            ModelSpec::LinearSvr(p) => FittedState::Linear(linear::fit_linear_svr(x, y, p.c, p.epsilon, p.epochs, seed)?),
            ModelSpec::Knn(p) => FittedState::Knn(KnnModel::fit(x, y, p.k, p.p)?),
            ModelSpec::Sgd(p) => {
                FittedState::Linear(linear::fit_sgd_linear(x, y, p.l1, p.l2, p.epochs, p.eta0, p.power_t, seed, None)?.model)
            }
            ModelSpec::Tree(p) => FittedState::Tree(Tree::fit(
                x,
                y,
                TreeParams { max_depth: p.max_depth, min_samples_split: p.min_samples_split, max_features: None },
            )?),
            ModelSpec::Bagging(p) => {
                let tp = TreeParams { max_depth: p.max_depth, min_samples_split: p.min_samples_split, max_features: None };
                FittedState::Forest(Forest::fit(x, y, p.n_estimators, true, tp, seed)?)
            }
            ModelSpec::RandomForest(p) => {
                if p.max_features.is_none() {
                    flags.push("max_features_all".to_string());
                }
                let tp =
                    TreeParams { max_depth: p.max_depth, min_samples_split: p.min_samples_split, max_features: p.max_features };
                FittedState::Forest(Forest::fit(x, y, p.n_estimators, p.bootstrap, tp, seed)?)
            }
            ModelSpec::Gbm(p) => {
                let tp = TreeParams { max_depth: Some(p.max_depth), min_samples_split: p.min_samples_split, max_features: None };
                FittedState::Gbm(Gbm::fit(x, y, p.n_stages, p.learning_rate, tp)?.model)
            }
            ModelSpec::AdaBoost(p) => {
                let tp = TreeParams { max_depth: p.max_depth, min_samples_split: 2, max_features: None };
                let out = AdaBoost::fit(x, y, p.n_estimators, p.learning_rate, p.loss, tp, seed)?;
                if out.stopped_early {
                    flags.push("early_stop".to_string());
                }
                FittedState::AdaBoost(out.model)
            }
        };
        self.fitted = Some(Fitted { n_features: x.cols(), state });
        self.flags = flags;
        Ok(())
    }

    pub fn predict(&self, x: &Matrix) -> Result<Vec<f64>> {
        let f = self.fitted.as_ref().ok_or(Error::NotFitted)?;
        if x.cols() != f.n_features {
            return Err(Error::Shape(format!("model expects {} features, got {}", f.n_features, x.cols())));
        }
        Ok(x.iter_rows().map(|r| f.state.predict_row(r)).collect())
    }

    pub fn to_json(&self) -> Result<String> {
        let file = ModelFile { format: MODEL_FORMAT.to_string(), version: MODEL_VERSION, model: self.clone() };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text)?;
        if file.format != MODEL_FORMAT || file.version != MODEL_VERSION {
            return Err(Error::BadConfig(format!("unsupported model file {} v{}", file.format, file.version)));
        }
        Ok(file.model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub mse: f64,
    pub r2: f64,
}

/// MSE and `R² = 1 − SS_res/SS_tot` about the mean of `truth`. A constant
/// `truth` gives R² 1 for a perfect fit and 0 otherwise.
pub fn score(pred: &[f64], truth: &[f64]) -> Result<Scores> {
    if pred.len() != truth.len() || truth.is_empty() {
        return Err(Error::Shape(format!("{} predictions for {} targets", pred.len(), truth.len())));
    }
    let n = truth.len() as f64;
    let mean = truth.iter().sum::<f64>() / n;
    let ss_res: f64 = pred.iter().zip(truth).map(|(p, t)| (p - t) * (p - t)).sum();
    let ss_tot: f64 = truth.iter().map(|t| (t - mean) * (t - mean)).sum();
    let r2 = if ss_tot > 0.0 {
        1.0 - ss_res / ss_tot
    } else if ss_res == 0.0 {
        1.0
    } else {
        0.0
    };
    Ok(Scores { mse: ss_res / n, r2 })
}

pub fn evaluate(model: &Regressor, x: &Matrix, y: &[f64]) -> Result<Scores> {
    score(&model.predict(x)?, y)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_kind_has_defaults_and_round_trips() {
        for k in KINDS {
            let s = ModelSpec::default_for(k).unwrap();
            assert_eq!(s.kind(), k);
            assert_eq!(serde_json::to_value(&s).unwrap()["kind"], k);
            let back: ModelSpec = serde_json::from_str(&serde_json::to_string(&s).unwrap()).unwrap();
            assert_eq!(back, s);
        }
        assert!(matches!(ModelSpec::default_for("svm"), Err(Error::UnknownModel { .. })));
    }

    #[test]
    fn with_param_replaces_one_field() {
        let s = ModelSpec::default_for("lasso").unwrap().with_param("l1", 0.5.into()).unwrap();
        assert_eq!(s, ModelSpec::Lasso(ElasticNetParams { l1: 0.5, ..ElasticNetParams::lasso() }));
        assert!(s.with_param("depth", 1.into()).is_err());
    }

    #[test]
    fn scores_basics() {
        assert_eq!(score(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), Scores { mse: 0.0, r2: 1.0 });
        assert_eq!(score(&[1.5, 1.5], &[1.0, 2.0]).unwrap().r2, 0.0);
    }
}
