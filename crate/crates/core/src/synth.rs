//! Synthetic injection cycles with a known latent-to-width relationship.
//!
//! Each cycle draws three process latents (melt temperature, packing
//! pressure, injection speed), each mapped to `u ∈ [-1, 1]`. The part width is
//!
//! `99.5 − 0.20·u_T + 0.30·u_P + 0.10·u_V + 0.08·u_T·u_P + 0.05·sin(π·u_V) + ε`
//!
//! with `ε ~ N(0, (0.04·noise_level)²)` mm. Traces are phase curves driven by
//! the same latents and the thermal still is a radial cooling field.

use std::f64::consts::PI;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dataset::{write_dataset, Channel, CycleRecord, DatasetManifest, SignalTrace, ThermoImage, DEFAULT_SAMPLE_RATE_HZ};
use crate::{rng, Error, Result};

pub const NOMINAL_WIDTH_MM: f64 = 99.5;
pub const WIDTH_NOISE_MM: f64 = 0.04;
pub const BASIS: [&str; 5] = ["u_t", "u_p", "u_v", "u_t*u_p", "sin(pi*u_v)"];
pub const COEFFICIENTS: [f64; 5] = [-0.20, 0.30, 0.10, 0.08, 0.05];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub n_cycles: usize,
    /// Multiplies every noise source; 0 gives noiseless cycles.
    pub noise_level: f64,
    pub n_samples: usize,
    /// Relative trace length jitter (uniform in `±length_jitter`).
    pub length_jitter: f64,
    pub pressure_peaks: usize,
    pub image_side: usize,
    pub n_test: usize,
    pub sample_rate_hz: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_cycles: 204,
            noise_level: 1.0,
            n_samples: 3000,
            length_jitter: 0.02,
            pressure_peaks: 2,
            image_side: 156,
            n_test: 27,
            sample_rate_hz: DEFAULT_SAMPLE_RATE_HZ,
        }
    }
}

impl SynthConfig {
    fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::BadConfig(format!("synth: {m}")));
        if self.n_cycles < 2 {
            return bad("need at least 2 cycles");
        }
        if !(self.noise_level >= 0.0) || !self.noise_level.is_finite() {
            return bad("noise_level must be a non-negative number");
        }
        if self.n_samples < 500 {
            return bad("need at least 500 samples per trace");
        }
        if !(0.0..0.2).contains(&self.length_jitter) {
            return bad("length_jitter must lie in [0, 0.2)");
        }
        if self.pressure_peaks == 0 || self.pressure_peaks > 6 {
            return bad("pressure_peaks must be between 1 and 6");
        }
        if self.image_side < 16 {
            return bad("image_side must be at least 16");
        }
        if self.n_test == 0 || self.n_test >= self.n_cycles {
            return Err(Error::BadSplitSize { n_test: self.n_test, total: self.n_cycles });
        }
        if !(self.sample_rate_hz > 0.0) {
            return bad("sample_rate_hz must be positive");
        }
        Ok(())
    }
}

/// Process latents of one cycle in physical units and on the unit scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Latents {
    pub melt_temperature_c: f64,
    pub packing_pressure_bar: f64,
    pub injection_speed_mm_s: f64,
    pub u_t: f64,
    pub u_p: f64,
    pub u_v: f64,
}

impl Latents {
    fn from_unit(u_t: f64, u_p: f64, u_v: f64) -> Self {
        Latents {
            melt_temperature_c: 230.0 + 15.0 * u_t,
            packing_pressure_bar: 600.0 + 150.0 * u_p,
            injection_speed_mm_s: 80.0 + 20.0 * u_v,
            u_t,
            u_p,
            u_v,
        }
    }

    /// Oracle basis in [`BASIS`] order.
    pub fn basis(&self) -> [f64; 5] {
        [self.u_t, self.u_p, self.u_v, self.u_t * self.u_p, (PI * self.u_v).sin()]
    }

    /// Noise-free width.
    pub fn planted_width(&self) -> f64 {
        NOMINAL_WIDTH_MM + self.basis().iter().zip(COEFFICIENTS).map(|(b, c)| b * c).sum::<f64>()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleTruth {
    pub cycle_id: String,
    pub latents: Latents,
    pub planted_width_mm: f64,
    pub width_mm: f64,
    pub planted_peak_indices: Vec<usize>,
}

/// Contents of `ground_truth.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub formula: String,
    pub intercept: f64,
    pub basis: Vec<String>,
    pub coefficients: Vec<f64>,
    pub noise_sd_mm: f64,
    pub seed: u64,
    pub config: SynthConfig,
    pub cycles: Vec<CycleTruth>,
}

#[derive(Debug, Clone)]
pub struct SynthOutput {
    pub records: Vec<CycleRecord>,
    pub truth: GroundTruth,
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

struct Noise<'a, R> {
    rng: &'a mut R,
    normal: Normal<f64>,
    level: f64,
}

impl<R: Rng> Noise<'_, R> {
    fn add(&mut self, v: &mut [f64], sd: f64) {
        if self.level == 0.0 {
            return;
        }
        for x in v {
            *x += self.level * sd * self.normal.sample(self.rng);
        }
    }
}

fn pressure(n: usize, lat: &Latents, k: usize) -> (Vec<f64>, Vec<usize>) {
    let nf = n as f64;
    let mut v = vec![0.0; n];
    let mut centres = Vec::with_capacity(k);
    for j in 0..k {
        let frac = 0.12 + 0.66 * j as f64 / k as f64 - 0.03 * lat.u_v;
        let centre = (frac * nf).round();
        let sigma = 6.0 + 6.0 * j as f64 / (k.max(2) - 1) as f64;
        let amp = if j == 0 {
            600.0 * (1.0 + 0.25 * lat.u_v + 0.10 * lat.u_p)
        } else {
            450.0 * (1.0 + 0.30 * lat.u_p) * 0.8f64.powi(j as i32 - 1)
        };
        for (i, x) in v.iter_mut().enumerate() {
            let d = i as f64 - centre;
            *x += amp * (-d * d / (2.0 * sigma * sigma)).exp();
        }
        centres.push(centre as usize);
    }
    (v, centres)
}

fn temperature(n: usize, lat: &Latents, t1: f64) -> Vec<f64> {
    let nf = n as f64;
    let peak = 220.0 + 25.0 * lat.u_t;
    let tau = nf * (0.35 + 0.08 * lat.u_t - 0.05 * lat.u_p);
    (0..n)
        .map(|i| {
            let t = i as f64;
            let rise = sigmoid((t - t1) / (0.005 * nf));
            40.0 + (peak - 40.0) * rise * (-(t - t1).max(0.0) / tau).exp()
        })
        .collect()
}

fn hydraulic(n: usize, lat: &Latents, t1: f64) -> Vec<f64> {
    let nf = n as f64;
    let w = 0.004 * nf;
    let inj = 80.0 * (1.0 + 0.25 * lat.u_v);
    let pack = 50.0 * (1.0 + 0.30 * lat.u_p);
    (0..n)
        .map(|i| {
            let t = i as f64;
            20.0 + inj * sigmoid((t - 0.05 * nf) / w) - (inj - pack) * sigmoid((t - t1) / w) - pack * sigmoid((t - 0.6 * nf) / w)
        })
        .collect()
}

fn screw(n: usize, lat: &Latents, t1: f64) -> Vec<f64> {
    let nf = n as f64;
    let start = 0.05 * nf;
    let cushion = 6.0 + 2.0 * lat.u_p - lat.u_t;
    (0..n)
        .map(|i| {
            let s = ((i as f64 - start) / (t1 - start)).clamp(0.0, 1.0);
            60.0 - (60.0 - cushion) * s
        })
        .collect()
}

fn thermal_image(side: usize, lat: &Latents) -> Vec<f64> {
    let c = (side as f64 - 1.0) / 2.0;
    let cx = c + 0.13 * side as f64 * lat.u_v;
    let radius = side as f64 * (0.19 + 0.05 * lat.u_p);
    let hot = 20_000.0 + 8_000.0 * lat.u_t;
    let mut px = Vec::with_capacity(side * side);
    for y in 0..side {
        for x in 0..side {
            let dx = x as f64 - cx;
            let dy = y as f64 - c;
            px.push(10_000.0 + hot * (-(dx * dx + dy * dy) / (2.0 * radius * radius)).exp());
        }
    }
    px
}

/// Generate `cfg.n_cycles` cycles. Cycle `i` draws everything from its own
/// `cycle-<i>` sub-stream of `seed`, so cycles are independent of each
/// other and of `n_cycles`.
pub fn generate(cfg: &SynthConfig, seed: u64) -> Result<SynthOutput> {
    cfg.validate()?;
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let mut records = Vec::with_capacity(cfg.n_cycles);
    let mut cycles = Vec::with_capacity(cfg.n_cycles);
    for i in 0..cfg.n_cycles {
        let mut r = rng::named(seed, &format!("cycle-{i}"));
        let lat = Latents::from_unit(r.random_range(-1.0..=1.0), r.random_range(-1.0..=1.0), r.random_range(-1.0..=1.0));
        let jitter = if cfg.length_jitter > 0.0 { r.random_range(-cfg.length_jitter..=cfg.length_jitter) } else { 0.0 };
        let n = (cfg.n_samples as f64 * (1.0 + jitter)).round() as usize;
        let mut noise = Noise { rng: &mut r, normal, level: cfg.noise_level };

        let (mut p, centres) = pressure(n, &lat, cfg.pressure_peaks);
        let t1 = centres[0] as f64;
        let p_range = p.iter().copied().fold(0.0, f64::max);
        noise.add(&mut p, 0.005 * p_range);
        let mut t = temperature(n, &lat, t1);
        noise.add(&mut t, 0.005 * 200.0);
        let mut h = hydraulic(n, &lat, t1);
        noise.add(&mut h, 0.005 * 100.0);
        let mut s = screw(n, &lat, t1);
        noise.add(&mut s, 0.002 * 60.0);

        let mut img = thermal_image(cfg.image_side, &lat);
        noise.add(&mut img, 0.01 * 20_000.0);
        let img: Vec<f64> = img.iter().map(|v| v.round().clamp(0.0, 65_535.0)).collect();

        let planted = lat.planted_width();
        let width = planted + cfg.noise_level * WIDTH_NOISE_MM * normal.sample(&mut r);

        let id = format!("c{i:04}");
        let traces = vec![
            SignalTrace::new(Channel::InMoldPressure, p, cfg.sample_rate_hz)?,
            SignalTrace::new(Channel::InMoldTemperature, t, cfg.sample_rate_hz)?,
            SignalTrace::new(Channel::HydraulicPressure, h, cfg.sample_rate_hz)?,
            SignalTrace::new(Channel::ScrewPosition, s, cfg.sample_rate_hz)?,
        ];
        let image = ThermoImage::new(cfg.image_side, cfg.image_side, img)?;
        records.push(CycleRecord::new(id.clone(), traces, image, Some(width))?);
        cycles.push(CycleTruth {
            cycle_id: id,
            latents: lat,
            planted_width_mm: planted,
            width_mm: width,
            planted_peak_indices: centres,
        });
    }
    let truth = GroundTruth {
        formula:
            "width_mm = 99.5 - 0.20*u_t + 0.30*u_p + 0.10*u_v + 0.08*u_t*u_p + 0.05*sin(pi*u_v) + N(0, (0.04*noise_level)^2)"
                .to_string(),
        intercept: NOMINAL_WIDTH_MM,
        basis: BASIS.iter().map(|s| s.to_string()).collect(),
        coefficients: COEFFICIENTS.to_vec(),
        noise_sd_mm: WIDTH_NOISE_MM * cfg.noise_level,
        seed,
        config: cfg.clone(),
        cycles,
    };
    Ok(SynthOutput { records, truth })
}

/// Generate and write a dataset directory plus `ground_truth.json`.
pub fn write_synth(dir: &Path, cfg: &SynthConfig, seed: u64) -> Result<(DatasetManifest, GroundTruth)> {
    let out = generate(cfg, seed)?;
    let manifest = write_dataset(dir, &out.records, seed, cfg.n_test)?;
    let path = dir.join("ground_truth.json");
    let text = serde_json::to_string_pretty(&out.truth)?;
    std::fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
    Ok((manifest, out.truth))
}
