//! Named scalar descriptors per cycle: order statistics of the raw signals,
//! statistics of their CWT peaks, and intensity/texture statistics of the
//! thermographic image.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cwt::{find_peaks_cwt, PeakConfig};
use crate::dataset::{Channel, CycleRecord, ThermoImage};
use crate::haralick::{image_haralick, HaralickConfig, FEATURE_NAMES};
use crate::linalg::Matrix;
use crate::stats::{order_stats, STAT_NAMES};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DescriptorSource {
    SignalRaw,
    SignalCwtPeaks,
    Image,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DescriptorEntry {
    pub name: String,
    pub source: DescriptorSource,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub channel: Option<Channel>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DescriptorManifest {
    pub entries: Vec<DescriptorEntry>,
}

impl DescriptorManifest {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn names(&self) -> Vec<String> {
        self.entries.iter().map(|e| e.name.clone()).collect()
    }

    /// SHA-256 over the ordered `(name, source)` pairs, hex encoded.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for e in &self.entries {
            h.update(e.name.as_bytes());
            h.update([0]);
            h.update(serde_json::to_string(&e.source).expect("enum serializes").as_bytes());
            h.update([b'\n']);
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Indices of the columns coming from `sources`.
    pub fn indices_of(&self, sources: &[DescriptorSource]) -> Vec<usize> {
        self.entries.iter().enumerate().filter(|(_, e)| sources.contains(&e.source)).map(|(i, _)| i).collect()
    }

    pub fn subset(&self, idx: &[usize]) -> DescriptorManifest {
        DescriptorManifest { entries: idx.iter().map(|&i| self.entries[i].clone()).collect() }
    }

    /// Rebuild entries from bare column names, inferring the source from the
    /// naming scheme.
    pub fn from_names(names: &[String]) -> Self {
        let entries = names
            .iter()
            .map(|n| {
                let channel = n.split('.').next().and_then(Channel::from_name);
                let source = if n.starts_with("img.") {
                    DescriptorSource::Image
                } else if n.contains(".peaks.") {
                    DescriptorSource::SignalCwtPeaks
                } else {
                    DescriptorSource::SignalRaw
                };
                DescriptorEntry { name: n.clone(), source, channel }
            })
            .collect();
        Self { entries }
    }
}

/// Which peak attribute the peak statistics summarize.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PeakAttribute {
    #[default]
    Height,
    /// Sample index of each peak.
    Position,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExtractConfig {
    pub peaks: PeakConfig,
    pub peak_attribute: PeakAttribute,
    /// Channels that receive CWT peak descriptors.
    pub cwt_channels: Vec<Channel>,
    pub haralick: HaralickConfig,
}

impl Default for ExtractConfig {
    fn default() -> Self {
        Self {
            peaks: PeakConfig::default(),
            peak_attribute: PeakAttribute::Height,
            cwt_channels: Channel::ALL.to_vec(),
            haralick: HaralickConfig::default(),
        }
    }
}

/// Column layout implied by `cfg`: per channel 10 raw statistics, then (for
/// CWT channels) a peak count and 10 peak statistics; then 10 image
/// statistics and 14 Haralick features.
pub fn manifest(cfg: &ExtractConfig) -> DescriptorManifest {
    let mut entries = Vec::new();
    for ch in Channel::ALL {
        for s in STAT_NAMES {
            entries.push(DescriptorEntry { name: format!("{ch}.{s}"), source: DescriptorSource::SignalRaw, channel: Some(ch) });
        }
        if cfg.cwt_channels.contains(&ch) {
            entries.push(DescriptorEntry {
                name: format!("{ch}.peaks.count"),
                source: DescriptorSource::SignalCwtPeaks,
                channel: Some(ch),
            });
            for s in STAT_NAMES {
                entries.push(DescriptorEntry {
                    name: format!("{ch}.peaks.{s}"),
                    source: DescriptorSource::SignalCwtPeaks,
                    channel: Some(ch),
                });
            }
        }
    }
    for s in STAT_NAMES {
        entries.push(DescriptorEntry { name: format!("img.{s}"), source: DescriptorSource::Image, channel: None });
    }
    for f in FEATURE_NAMES {
        entries.push(DescriptorEntry { name: format!("img.haralick.{f}"), source: DescriptorSource::Image, channel: None });
    }
    DescriptorManifest { entries }
}

/// Raw-signal and CWT-peak descriptors of one record. Peak statistics need
/// at least two peaks; otherwise they are NaN (imputed later).
pub fn signal_descriptors(record: &CycleRecord, cfg: &ExtractConfig) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for ch in Channel::ALL {
        let samples = &record.trace(ch).samples;
        out.extend(order_stats(samples)?.values);
        if cfg.cwt_channels.contains(&ch) {
            let peaks = find_peaks_cwt(samples, &cfg.peaks)?;
            out.push(peaks.len() as f64);
            let attr: Vec<f64> = peaks
                .iter()
                .map(|p| match cfg.peak_attribute {
                    PeakAttribute::Height => p.height,
                    PeakAttribute::Position => p.index as f64,
                })
                .collect();
            match order_stats(&attr) {
                Ok(s) => out.extend(s.values),
                Err(Error::TooFewValues { .. }) => out.extend([f64::NAN; 10]),
                Err(e) => return Err(e),
            }
        }
    }
    Ok(out)
}

pub fn image_descriptors(img: &ThermoImage, cfg: &HaralickConfig) -> Result<Vec<f64>> {
    let mut out = order_stats(&img.pixels)?.values.to_vec();
    out.extend(image_haralick(img, cfg)?.values);
    Ok(out)
}

/// Rows aligned to `cycle_ids`, columns to `manifest`. NaN marks an imputed
/// entry; the train harness replaces it with the training column mean.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub manifest: DescriptorManifest,
    pub cycle_ids: Vec<String>,
    pub values: Matrix,
}

impl FeatureMatrix {
    pub fn imputed(&self) -> usize {
        self.values.data().iter().filter(|v| v.is_nan()).count()
    }

    pub fn select_columns(&self, idx: &[usize]) -> FeatureMatrix {
        FeatureMatrix {
            manifest: self.manifest.subset(idx),
            cycle_ids: self.cycle_ids.clone(),
            values: self.values.select_cols(idx),
        }
    }

    pub fn select_named(&self, names: &[String]) -> Result<FeatureMatrix> {
        let idx = names
            .iter()
            .map(|n| {
                self.manifest
                    .entries
                    .iter()
                    .position(|e| &e.name == n)
                    .ok_or_else(|| Error::BadConfig(format!("unknown descriptor {n:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(self.select_columns(&idx))
    }

    pub fn select_rows(&self, idx: &[usize]) -> FeatureMatrix {
        FeatureMatrix {
            manifest: self.manifest.clone(),
            cycle_ids: idx.iter().map(|&i| self.cycle_ids[i].clone()).collect(),
            values: self.values.select_rows(idx),
        }
    }
}

pub fn extract_row(record: &CycleRecord, cfg: &ExtractConfig) -> Result<Vec<f64>> {
    let mut row = signal_descriptors(record, cfg)?;
    row.extend(image_descriptors(&record.image, &cfg.haralick)?);
    Ok(row)
}

pub fn build_feature_matrix(records: &[CycleRecord], cfg: &ExtractConfig) -> Result<FeatureMatrix> {
    let manifest = manifest(cfg);
    let mut data = Vec::with_capacity(records.len() * manifest.len());
    for r in records {
        let row = extract_row(r, cfg)
            .map_err(|e| Error::MalformedRecord { cycle_id: r.cycle_id.clone(), reason: format!("extraction failed: {e}") })?;
        debug_assert_eq!(row.len(), manifest.len());
        data.extend(row);
    }
    let values = Matrix::new(records.len(), manifest.len(), data)?;
    Ok(FeatureMatrix { manifest, cycle_ids: records.iter().map(|r| r.cycle_id.clone()).collect(), values })
}

/// Sidecar written next to `features.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeaturesSidecar {
    pub manifest_hash: String,
    pub manifest: DescriptorManifest,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extract: Option<ExtractConfig>,
}

pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    let mut s = csv_path.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

/// Write `cycle_id` plus one column per descriptor; imputed entries are
/// empty cells. A `<path>.manifest.json` sidecar records the manifest and
/// its hash.
pub fn write_features_csv(path: &Path, fm: &FeatureMatrix, extract: Option<&ExtractConfig>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        k => Error::BadConfig(format!("{k:?}")),
    })?;
    let mut header = vec!["cycle_id".to_string()];
    header.extend(fm.manifest.names());
    w.write_record(&header)?;
    for (i, id) in fm.cycle_ids.iter().enumerate() {
        let mut rec = vec![id.clone()];
        rec.extend(fm.values.row(i).iter().map(|v| if v.is_nan() { String::new() } else { v.to_string() }));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    let side = FeaturesSidecar { manifest_hash: fm.manifest.hash(), manifest: fm.manifest.clone(), extract: extract.cloned() };
    let sp = sidecar_path(path);
    let mut f = fs::File::create(&sp).map_err(|e| Error::io(&sp, e))?;
    serde_json::to_writer_pretty(&mut f, &side)?;
    f.write_all(b"\n").map_err(|e| Error::io(&sp, e))
}

/// Read a features CSV. The manifest comes from the sidecar when present
/// (and must agree with the header), otherwise it is inferred from names.
pub fn read_features_csv(path: &Path) -> Result<FeatureMatrix> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::Reader::from_reader(bytes.as_slice());
    let header = rdr.headers()?.clone();
    if header.get(0) != Some("cycle_id") {
        return Err(Error::BadConfig(format!("{}: first column must be cycle_id", path.display())));
    }
    let names: Vec<String> = header.iter().skip(1).map(str::to_owned).collect();
    let sp = sidecar_path(path);
    let manifest = match fs::read(&sp) {
        Ok(b) => {
            let side: FeaturesSidecar = serde_json::from_slice(&b)?;
            if side.manifest.names() != names {
                return Err(Error::BadConfig(format!("{}: header does not match {}", path.display(), sp.display())));
            }
            side.manifest
        }
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => DescriptorManifest::from_names(&names),
        Err(e) => return Err(Error::io(&sp, e)),
    };
    let mut ids = Vec::new();
    let mut data = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let id = rec.get(0).unwrap_or_default().to_string();
        if rec.len() != names.len() + 1 {
            return Err(Error::MalformedRecord { cycle_id: id, reason: "wrong number of feature columns".into() });
        }
        for cell in rec.iter().skip(1) {
            let cell = cell.trim();
            data.push(if cell.is_empty() {
                f64::NAN
            } else {
                cell.parse()
                    .map_err(|_| Error::MalformedRecord { cycle_id: id.clone(), reason: format!("bad number {cell:?}") })?
            });
        }
        ids.push(id);
    }
    let values = Matrix::new(ids.len(), names.len(), data)?;
    Ok(FeatureMatrix { manifest, cycle_ids: ids, values })
}
