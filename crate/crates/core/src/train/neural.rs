use std::path::Path;

use moldline_nn::arch::build;
use moldline_nn::lstm::{train_lstm, Framing, LstmNetwork, LstmSpec};
use moldline_nn::network::{train_network, Network};
use moldline_nn::train::{LossPoint, TrainConfig as NnTrainConfig};
use moldline_nn::Tensor;
use serde::{Deserialize, Serialize};

use crate::dataset::{Channel, CycleRecord};
use crate::preprocess::{downscale_image, resample_linear, Standardizer};
use crate::{Error, Result};

use super::config::TrainConfig;

pub const NEURAL_KINDS: [&str; 7] = ["mlp_2fc", "cnn1_fc1", "cnn2_fc1", "cnn2_fc2", "cnn3_fc2", "lstm1", "lstm2"];

pub fn is_neural_kind(kind: &str) -> bool {
    NEURAL_KINDS.contains(&kind)
}

fn lstm_layers(kind: &str) -> Option<usize> {
    match kind {
        "lstm1" => Some(1),
        "lstm2" => Some(2),
        _ => None,
    }
}

/// Per-pixel standardization of area-downscaled images.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImagePrep {
    pub side: usize,
    pub means: Vec<f64>,
    /// Zero-variance pixels keep std 1.
    pub stds: Vec<f64>,
}

impl ImagePrep {
    fn small(side: usize, r: &CycleRecord) -> Result<Vec<f64>> {
        Ok(downscale_image(&r.image, side, side)?.pixels)
    }

    pub fn fit(records: &[&CycleRecord], side: usize) -> Result<Self> {
        if records.len() < 2 {
            return Err(Error::TooFewValues { got: records.len(), need: 2 });
        }
        let imgs = records.iter().map(|r| Self::small(side, r)).collect::<Result<Vec<_>>>()?;
        let n = imgs.len() as f64;
        let d = side * side;
        let mut means = vec![0.0; d];
        for img in &imgs {
            for (m, v) in means.iter_mut().zip(img) {
                *m += v;
            }
        }
        means.iter_mut().for_each(|m| *m /= n);
        let mut stds = vec![0.0; d];
        for img in &imgs {
            for k in 0..d {
                stds[k] += (img[k] - means[k]) * (img[k] - means[k]);
            }
        }
        stds.iter_mut().for_each(|s| *s = if *s > 0.0 { (*s / n).sqrt() } else { 1.0 });
        Ok(Self { side, means, stds })
    }

    pub fn apply(&self, r: &CycleRecord) -> Result<Vec<f64>> {
        let img = Self::small(self.side, r)?;
        Ok(img.iter().zip(&self.means).zip(&self.stds).map(|((v, m), s)| (v - m) / s).collect())
    }
}

/// Per-channel standardization of resampled traces, then framing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalPrep {
    pub len: usize,
    pub framing: Framing,
    pub channels: Vec<Standardizer>,
}

fn resampled(r: &CycleRecord, len: usize) -> Result<Vec<Vec<f64>>> {
    Channel::ALL.iter().map(|&c| resample_linear(&r.trace(c).samples, len)).collect()
}

impl SignalPrep {
    pub fn fit(records: &[&CycleRecord], len: usize, framing: Framing) -> Result<Self> {
        framing.dims(len, Channel::ALL.len())?;
        let mut pooled = vec![Vec::new(); Channel::ALL.len()];
        for r in records {
            for (acc, ch) in pooled.iter_mut().zip(resampled(r, len)?) {
                acc.extend(ch);
            }
        }
        let channels = pooled.iter().map(|v| Standardizer::fit(v)).collect::<Result<Vec<_>>>()?;
        Ok(Self { len, framing, channels })
    }

    pub fn apply(&self, r: &CycleRecord) -> Result<Vec<f64>> {
        let chans = resampled(r, self.len)?.iter().zip(&self.channels).map(|(c, s)| s.apply(c)).collect::<Result<Vec<_>>>()?;
        Ok(self.framing.frame(&chans)?)
    }

    pub fn dims(&self) -> Result<(usize, usize)> {
        Ok(self.framing.dims(self.len, Channel::ALL.len())?)
    }
}

/// Unstandardized framing of one record, for inspection.
pub fn frame_signals(r: &CycleRecord, len: usize, framing: Framing) -> Result<Vec<f64>> {
    Ok(framing.frame(&resampled(r, len)?)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum NeuralPrep {
    Image(ImagePrep),
    Signal(SignalPrep),
}

pub fn image_tensor(prep: &ImagePrep, records: &[&CycleRecord]) -> Result<Tensor> {
    let mut data = Vec::with_capacity(records.len() * prep.side * prep.side);
    for r in records {
        data.extend(prep.apply(r)?);
    }
    Ok(Tensor::new(vec![records.len(), prep.side, prep.side, 1], data)?)
}

pub fn signal_tensor(prep: &SignalPrep, records: &[&CycleRecord]) -> Result<Tensor> {
    let (steps, feats) = prep.dims()?;
    let mut data = Vec::with_capacity(records.len() * steps * feats);
    for r in records {
        data.extend(prep.apply(r)?);
    }
    Ok(Tensor::new(vec![records.len(), steps, feats], data)?)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum NeuralModel {
    Network(Network),
    Lstm(LstmNetwork),
}

pub const NEURAL_MODEL_FORMAT: &str = "moldline-neural-model";

/// A trained network with its input and target preprocessing.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SavedNeural {
    pub format: String,
    pub version: u32,
    pub kind: String,
    pub iterations: usize,
    pub prep: NeuralPrep,
    pub target: Standardizer,
    pub model: NeuralModel,
}

impl SavedNeural {
    fn inputs(&self, records: &[&CycleRecord]) -> Result<Tensor> {
        match &self.prep {
            NeuralPrep::Image(p) => image_tensor(p, records),
            NeuralPrep::Signal(p) => signal_tensor(p, records),
        }
    }

    /// Predictions in standardized target units.
    pub fn predict_z(&mut self, records: &[&CycleRecord]) -> Result<Vec<f64>> {
        let x = self.inputs(records)?;
        Ok(match &mut self.model {
            NeuralModel::Network(n) => n.predict(&x)?,
            NeuralModel::Lstm(n) => n.predict(&x)?,
        })
    }

    pub fn predict(&mut self, records: &[&CycleRecord]) -> Result<Vec<f64>> {
        let z = self.predict_z(records)?;
        self.target.inverse(&z)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(self)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: Self = serde_json::from_str(text)?;
        if m.format != NEURAL_MODEL_FORMAT || m.version != 1 {
            return Err(Error::BadConfig(format!("unsupported model file {} v{}", m.format, m.version)));
        }
        Ok(m)
    }
}

/// Outcome of [`fit_neural`].
pub struct NeuralFit {
    pub model: SavedNeural,
    pub trajectory: Vec<LossPoint>,
    pub decisions: Vec<String>,
}

/// Train a neural kind on the `train` rows of `records`. Input and target
/// statistics come from the training rows only.
pub fn fit_neural(
    kind: &str,
    records: &[CycleRecord],
    y: &[f64],
    train: &[usize],
    cfg: &TrainConfig,
    seed: u64,
    iterations: usize,
) -> Result<NeuralFit> {
    if records.len() != y.len() {
        return Err(Error::Shape(format!("{} records but {} labels", records.len(), y.len())));
    }
    let nc = &cfg.neural;
    let rows: Vec<&CycleRecord> = train.iter().map(|&i| &records[i]).collect();
    let ytr: Vec<f64> = train.iter().map(|&i| y[i]).collect();
    let target = Standardizer::fit(&ytr)?;
    let z = target.apply(&ytr)?;
    let mut tc =
        NnTrainConfig { batch_size: nc.batch_size, iterations, l2: nc.l2, log_every: nc.log_every, clip_norm: None, seed };
    let mut decisions = vec![format!("target standardized on {} training rows", train.len())];
    let (prep, model, trajectory) = if let Some(layers) = lstm_layers(kind) {
        let prep = SignalPrep::fit(&rows, nc.signal_len, nc.framing)?;
        let (steps, feats) = prep.dims()?;
        decisions.push(format!("signals resampled to {} samples, framed as {steps} steps of {feats} features", nc.signal_len));
        decisions.push(format!("gradient clipping at global norm {}", nc.lstm_clip_norm));
        tc.l2 = nc.lstm_l2;
        tc.clip_norm = Some(nc.lstm_clip_norm);
        let mut spec = LstmSpec::new(feats, layers);
        spec.hidden_size = nc.lstm_hidden;
        let mut net = LstmNetwork::new(spec, seed)?;
        let x = signal_tensor(&prep, &rows)?;
        let traj = train_lstm(&mut net, &x, &z, &tc)?;
        (NeuralPrep::Signal(prep), NeuralModel::Lstm(net), traj)
    } else {
        let arch = &nc.arch;
        let spec = build(kind, arch).ok_or_else(|| Error::UnknownModel { kind: kind.to_string(), valid: super::all_kinds() })?;
        if spec.input_shape != [nc.image_side, nc.image_side, 1] {
            return Err(Error::BadConfig(format!("{kind} expects {:?} inputs", spec.input_shape)));
        }
        let prep = ImagePrep::fit(&rows, nc.image_side)?;
        decisions.push(format!("images area-downscaled to {0}x{0}, standardized per pixel", nc.image_side));
        decisions.push(format!("dropout {:?} with rate {}", arch.dropout, arch.dropout_rate));
        let mut net = Network::new(spec, seed)?;
        let x = image_tensor(&prep, &rows)?;
        let traj = train_network(&mut net, &x, &z, &tc)?;
        (NeuralPrep::Image(prep), NeuralModel::Network(net), traj)
    };
    let model =
        SavedNeural { format: NEURAL_MODEL_FORMAT.into(), version: 1, kind: kind.to_string(), iterations, prep, target, model };
    Ok(NeuralFit { model, trajectory, decisions })
}
