//! Cycle records, the dataset manifest and their on-disk formats.
//!
//! A dataset directory looks like
//!
//! ```text
//! manifest.json
//! cycles/<id>.csv     one column per channel, one row per sample tick
//! images/<id>.pgm     16-bit binary PGM (P5, maxval 65535)
//! ```
//!
//! Trace CSVs pad shorter channels with empty cells. Numbers are written with
//! Rust's shortest round-trip formatting, so reloading is bit-exact.

use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::{rng, Error, Result};

pub const SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_SAMPLE_RATE_HZ: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    InMoldPressure,
    InMoldTemperature,
    HydraulicPressure,
    ScrewPosition,
}

impl Channel {
    pub const ALL: [Channel; 4] =
        [Channel::InMoldPressure, Channel::InMoldTemperature, Channel::HydraulicPressure, Channel::ScrewPosition];

    pub fn name(self) -> &'static str {
        match self {
            Channel::InMoldPressure => "in_mold_pressure",
            Channel::InMoldTemperature => "in_mold_temperature",
            Channel::HydraulicPressure => "hydraulic_pressure",
            Channel::ScrewPosition => "screw_position",
        }
    }

    pub fn from_name(s: &str) -> Option<Channel> {
        Channel::ALL.into_iter().find(|c| c.name() == s)
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalTrace {
    pub channel: Channel,
    pub samples: Vec<f64>,
    pub sample_rate_hz: f64,
}

impl SignalTrace {
    pub fn new(channel: Channel, samples: Vec<f64>, sample_rate_hz: f64) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptyTrace);
        }
        if !(sample_rate_hz > 0.0) {
            return Err(Error::BadConfig(format!("sample rate must be positive, got {sample_rate_hz}")));
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::BadConfig(format!("{channel}: non-finite sample at {i}")));
        }
        Ok(Self { channel, samples, sample_rate_hz })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThermoImage {
    pub width: usize,
    pub height: usize,
    /// Row-major intensities.
    pub pixels: Vec<f64>,
}

impl ThermoImage {
    pub fn new(width: usize, height: usize, pixels: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 || pixels.len() != width * height {
            return Err(Error::BadDims(format!("{width}x{height} image with {} pixels", pixels.len())));
        }
        if pixels.iter().any(|v| !v.is_finite()) {
            return Err(Error::BadDims("non-finite pixel".into()));
        }
        Ok(Self { width, height, pixels })
    }

    pub fn get(&self, y: usize, x: usize) -> f64 {
        self.pixels[y * self.width + x]
    }
}

/// One production cycle. Traces are stored in [`Channel::ALL`] order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleRecord {
    pub cycle_id: String,
    pub traces: Vec<SignalTrace>,
    pub image: ThermoImage,
    pub width_mm: Option<f64>,
}

impl CycleRecord {
    /// Validate that every channel appears exactly once and reorder the
    /// traces canonically.
    pub fn new(cycle_id: impl Into<String>, traces: Vec<SignalTrace>, image: ThermoImage, width_mm: Option<f64>) -> Result<Self> {
        let cycle_id = cycle_id.into();
        let mut slots: [Option<SignalTrace>; 4] = Default::default();
        for t in traces {
            let slot = &mut slots[t.channel.index()];
            if slot.is_some() {
                return Err(Error::ChannelMismatch { cycle_id, reason: format!("{} appears twice", t.channel) });
            }
            *slot = Some(t);
        }
        if let Some(missing) = Channel::ALL.into_iter().find(|c| slots[c.index()].is_none()) {
            return Err(Error::ChannelMismatch { cycle_id, reason: format!("missing channel {missing}") });
        }
        if width_mm.is_some_and(|w| !w.is_finite()) {
            return Err(Error::MalformedRecord { cycle_id, reason: "non-finite width_mm".into() });
        }
        let traces = slots.into_iter().map(|s| s.expect("checked above")).collect();
        Ok(Self { cycle_id, traces, image, width_mm })
    }

    pub fn trace(&self, channel: Channel) -> &SignalTrace {
        &self.traces[channel.index()]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub cycle_id: String,
    /// Path of the trace CSV, relative to the manifest's directory.
    pub traces: PathBuf,
    /// Path of the PGM image, relative to the manifest's directory.
    pub image: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub width_mm: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub schema_version: u32,
    #[serde(default = "default_rate")]
    pub sample_rate_hz: f64,
    pub split_seed: u64,
    pub n_train: usize,
    pub n_test: usize,
    pub records: Vec<ManifestEntry>,
}

fn default_rate() -> f64 {
    DEFAULT_SAMPLE_RATE_HZ
}

impl DatasetManifest {
    fn validate(&self) -> Result<()> {
        let malformed = |reason: String| Error::MalformedRecord { cycle_id: "<manifest>".into(), reason };
        if self.schema_version != SCHEMA_VERSION {
            return Err(malformed(format!("unsupported schema_version {}", self.schema_version)));
        }
        if self.records.is_empty() {
            return Err(malformed("manifest lists no records".into()));
        }
        if self.n_train + self.n_test != self.records.len() {
            return Err(malformed(format!(
                "n_train {} + n_test {} != {} records",
                self.n_train,
                self.n_test,
                self.records.len()
            )));
        }
        let mut ids: Vec<&str> = self.records.iter().map(|r| r.cycle_id.as_str()).collect();
        ids.sort_unstable();
        if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
            return Err(malformed(format!("duplicate cycle_id {}", w[0])));
        }
        Ok(())
    }
}

/// A manifest plus its loaded records, in manifest order.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub manifest: DatasetManifest,
    pub records: Vec<CycleRecord>,
}

impl Dataset {
    pub fn labels(&self) -> Result<Vec<f64>> {
        self.records
            .iter()
            .map(|r| {
                r.width_mm
                    .ok_or_else(|| Error::MalformedRecord { cycle_id: r.cycle_id.clone(), reason: "no width_mm label".into() })
            })
            .collect()
    }

    pub fn cycle_ids(&self) -> Vec<String> {
        self.records.iter().map(|r| r.cycle_id.clone()).collect()
    }

    /// The manifest's own train/test partition.
    pub fn split(&self) -> Result<Split> {
        split(self.records.len(), self.manifest.split_seed, self.manifest.n_test)
    }
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

/// Resolve the manifest path: a directory means `<dir>/manifest.json`.
pub fn manifest_path(path: &Path) -> PathBuf {
    if path.is_dir() {
        path.join("manifest.json")
    } else {
        path.to_path_buf()
    }
}

pub fn read_manifest(path: &Path) -> Result<DatasetManifest> {
    let path = manifest_path(path);
    let bytes = read_file(&path)?;
    let manifest: DatasetManifest = serde_json::from_slice(&bytes)
        .map_err(|e| Error::MalformedRecord { cycle_id: "<manifest>".into(), reason: format!("{}: {e}", path.display()) })?;
    manifest.validate()?;
    Ok(manifest)
}

/// Load a manifest (file or dataset directory) and every record it names.
pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let path = manifest_path(path);
    let manifest = read_manifest(&path)?;
    let root = path.parent().unwrap_or(Path::new("."));
    let records = manifest.records.iter().map(|e| load_record(root, e, manifest.sample_rate_hz)).collect::<Result<Vec<_>>>()?;
    Ok(Dataset { manifest, records })
}

fn load_record(root: &Path, entry: &ManifestEntry, rate: f64) -> Result<CycleRecord> {
    let id = &entry.cycle_id;
    let malformed = |reason: String| Error::MalformedRecord { cycle_id: id.clone(), reason };
    let traces = read_traces(&root.join(&entry.traces), rate).map_err(|e| match e {
        Error::MalformedRecord { reason, .. } => malformed(reason),
        Error::ChannelMismatch { reason, .. } => Error::ChannelMismatch { cycle_id: id.clone(), reason },
        Error::EmptyTrace => malformed("empty trace".into()),
        Error::BadConfig(reason) => malformed(reason),
        other => other,
    })?;
    let image = read_pgm(&root.join(&entry.image)).map_err(|e| match e {
        Error::BadDims(reason) | Error::BadConfig(reason) => malformed(format!("image: {reason}")),
        other => other,
    })?;
    CycleRecord::new(id.clone(), traces, image, entry.width_mm)
}

/// Write traces as CSV: header of channel names, shorter channels padded
/// with empty cells.
pub fn write_traces(path: &Path, traces: &[SignalTrace]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_io(path, e))?;
    w.write_record(traces.iter().map(|t| t.channel.name()))?;
    let len = traces.iter().map(|t| t.samples.len()).max().unwrap_or(0);
    let mut row = vec![String::new(); traces.len()];
    for i in 0..len {
        for (cell, t) in row.iter_mut().zip(traces) {
            cell.clear();
            if let Some(v) = t.samples.get(i) {
                cell.push_str(&v.to_string());
            }
        }
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn csv_io(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        kind => Error::BadConfig(format!("{}: {kind:?}", path.display())),
    }
}

pub fn read_traces(path: &Path, rate: f64) -> Result<Vec<SignalTrace>> {
    let bytes = read_file(path)?;
    let mut rdr = csv::Reader::from_reader(bytes.as_slice());
    let header = rdr.headers()?.clone();
    let mut channels = Vec::with_capacity(header.len());
    for name in header.iter() {
        let ch = Channel::from_name(name.trim()).ok_or_else(|| Error::ChannelMismatch {
            cycle_id: String::new(),
            reason: format!("unknown channel column {name:?}"),
        })?;
        channels.push(ch);
    }
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); channels.len()];
    let mut ended = vec![false; channels.len()];
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::MalformedRecord { cycle_id: String::new(), reason: e.to_string() })?;
        for (c, cell) in rec.iter().enumerate() {
            let cell = cell.trim();
            if cell.is_empty() {
                ended[c] = true;
                continue;
            }
            if ended[c] {
                return Err(Error::MalformedRecord {
                    cycle_id: String::new(),
                    reason: format!("{}: value after padding in row {}", channels[c], line + 2),
                });
            }
            let v: f64 = cell.parse().map_err(|_| Error::MalformedRecord {
                cycle_id: String::new(),
                reason: format!("{}: bad number {cell:?} in row {}", channels[c], line + 2),
            })?;
            columns[c].push(v);
        }
    }
    channels.into_iter().zip(columns).map(|(ch, s)| SignalTrace::new(ch, s, rate)).collect()
}

/// Comment carrying the real-valued range of a rescaled image.
const RANGE_TAG: &str = "moldline range";

/// Write a 16-bit P5 PGM. Images whose pixels are all integers in
/// `0..=65535` are stored verbatim; anything else is mapped linearly from
/// `[min, max]` onto the full 16-bit range, with the range recorded in a
/// header comment so the loader can invert the mapping.
pub fn write_pgm(path: &Path, img: &ThermoImage) -> Result<()> {
    let raw = img.pixels.iter().all(|&v| v >= 0.0 && v <= 65535.0 && v.fract() == 0.0);
    let mut out = Vec::with_capacity(img.pixels.len() * 2 + 64);
    let codes: Vec<u16> = if raw {
        write!(out, "P5\n{} {}\n65535\n", img.width, img.height).expect("in-memory write");
        img.pixels.iter().map(|&v| v as u16).collect()
    } else {
        let lo = img.pixels.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = img.pixels.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        write!(out, "P5\n# {RANGE_TAG} {lo} {hi}\n{} {}\n65535\n", img.width, img.height).expect("in-memory write");
        let span = hi - lo;
        img.pixels.iter().map(|&v| if span > 0.0 { ((v - lo) / span * 65535.0).round() as u16 } else { 0 }).collect()
    };
    for c in codes {
        out.extend_from_slice(&c.to_be_bytes());
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn read_pgm(path: &Path) -> Result<ThermoImage> {
    let bytes = read_file(path)?;
    let bad = |m: &str| Error::BadDims(format!("{}: {m}", path.display()));
    let mut rdr = BufReader::new(bytes.as_slice());
    let mut tokens: Vec<String> = Vec::new();
    let mut range: Option<(f64, f64)> = None;
    while tokens.len() < 4 {
        let mut line = String::new();
        if rdr.read_line(&mut line).map_err(|e| Error::io(path, e))? == 0 {
            return Err(bad("truncated header"));
        }
        let (content, comment) = match line.find('#') {
            Some(i) => (&line[..i], Some(line[i + 1..].trim())),
            None => (line.as_str(), None),
        };
        if let Some(rest) = comment.and_then(|c| c.strip_prefix(RANGE_TAG)) {
            let v: Vec<f64> = rest.split_whitespace().filter_map(|t| t.parse().ok()).collect();
            if v.len() != 2 {
                return Err(bad("malformed range comment"));
            }
            range = Some((v[0], v[1]));
        }
        tokens.extend(content.split_whitespace().map(str::to_owned));
    }
    if tokens[0] != "P5" {
        return Err(bad("not a binary PGM (P5)"));
    }
    let num = |t: &str| t.parse::<usize>().map_err(|_| bad("bad header number"));
    let (w, h, maxval) = (num(&tokens[1])?, num(&tokens[2])?, num(&tokens[3])?);
    if maxval != 65535 {
        return Err(bad("only 16-bit PGM (maxval 65535) is supported"));
    }
    let mut body = Vec::new();
    rdr.read_to_end(&mut body).map_err(|e| Error::io(path, e))?;
    if body.len() != w * h * 2 {
        return Err(bad("pixel data length does not match header"));
    }
    let pixels = body
        .chunks_exact(2)
        .map(|b| {
            let c = u16::from_be_bytes([b[0], b[1]]) as f64;
            match range {
                Some((lo, hi)) => lo + (hi - lo) * c / 65535.0,
                None => c,
            }
        })
        .collect();
    ThermoImage::new(w, h, pixels)
}

/// Write records and a manifest into `dir`.
pub fn write_dataset(dir: &Path, records: &[CycleRecord], split_seed: u64, n_test: usize) -> Result<DatasetManifest> {
    if records.is_empty() {
        return Err(Error::MalformedRecord { cycle_id: "<manifest>".into(), reason: "no records to write".into() });
    }
    if n_test == 0 || n_test >= records.len() {
        return Err(Error::BadSplitSize { n_test, total: records.len() });
    }
    for sub in ["cycles", "images"] {
        fs::create_dir_all(dir.join(sub)).map_err(|e| Error::io(dir.join(sub), e))?;
    }
    let mut entries = Vec::with_capacity(records.len());
    for r in records {
        let traces = PathBuf::from("cycles").join(format!("{}.csv", r.cycle_id));
        let image = PathBuf::from("images").join(format!("{}.pgm", r.cycle_id));
        write_traces(&dir.join(&traces), &r.traces)?;
        write_pgm(&dir.join(&image), &r.image)?;
        entries.push(ManifestEntry { cycle_id: r.cycle_id.clone(), traces, image, width_mm: r.width_mm });
    }
    let manifest = DatasetManifest {
        schema_version: SCHEMA_VERSION,
        sample_rate_hz: records[0].traces[0].sample_rate_hz,
        split_seed,
        n_train: records.len() - n_test,
        n_test,
        records: entries,
    };
    let path = dir.join("manifest.json");
    let mut f = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
    serde_json::to_writer_pretty(&mut f, &manifest)?;
    f.write_all(b"\n").map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}

/// Train/test row indices, each sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Uniform random partition of `0..total` with `n_test` test rows.
pub fn split(total: usize, seed: u64, n_test: usize) -> Result<Split> {
    if n_test == 0 || n_test >= total {
        return Err(Error::BadSplitSize { n_test, total });
    }
    let mut idx: Vec<usize> = (0..total).collect();
    idx.shuffle(&mut rng::named(seed, "split"));
    let mut test = idx[..n_test].to_vec();
    let mut train = idx[n_test..].to_vec();
    test.sort_unstable();
    train.sort_unstable();
    Ok(Split { train, test })
}

/// Held-out row indices of each of `k` folds over `0..total`. Rows are
/// shuffled once from the `<stream>` sub-stream of `seed`, then dealt round
/// robin, so fold sizes differ by at most one. Each fold is sorted.
pub fn folds(total: usize, k: usize, seed: u64, stream: &str) -> Result<Vec<Vec<usize>>> {
    if k < 2 || k > total {
        return Err(Error::BadConfig(format!("cannot make {k} folds from {total} rows")));
    }
    let mut idx: Vec<usize> = (0..total).collect();
    idx.shuffle(&mut rng::named(seed, stream));
    let mut out = vec![Vec::with_capacity(total / k + 1); k];
    for (pos, i) in idx.into_iter().enumerate() {
        out[pos % k].push(i);
    }
    out.iter_mut().for_each(|f| f.sort_unstable());
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(id: &str, channels: &[Channel]) -> Result<CycleRecord> {
        let traces = channels.iter().map(|&c| SignalTrace::new(c, vec![1.0, 2.0], 100.0).unwrap()).collect();
        CycleRecord::new(id, traces, ThermoImage::new(1, 1, vec![0.0]).unwrap(), Some(1.0))
    }

    #[test]
    fn channels_reordered_and_checked() {
        let r = record(
            "a",
            &[Channel::ScrewPosition, Channel::InMoldPressure, Channel::HydraulicPressure, Channel::InMoldTemperature],
        )
        .unwrap();
        assert_eq!(r.traces.iter().map(|t| t.channel).collect::<Vec<_>>(), Channel::ALL.to_vec());
        let missing = record("b", &Channel::ALL[..3]);
        assert!(matches!(missing, Err(Error::ChannelMismatch { ref cycle_id, .. }) if cycle_id == "b"));
        let dup = record("c", &[Channel::InMoldPressure, Channel::InMoldPressure]);
        assert!(matches!(dup, Err(Error::ChannelMismatch { .. })));
    }

    #[test]
    fn split_sizes() {
        let s = split(204, 7, 27).unwrap();
        assert_eq!((s.train.len(), s.test.len()), (177, 27));
        assert_eq!(s, split(204, 7, 27).unwrap());
        assert!(matches!(split(204, 7, 204), Err(Error::BadSplitSize { .. })));
        assert!(matches!(split(204, 7, 0), Err(Error::BadSplitSize { .. })));
    }
}
