//! Ricker-wavelet continuous wavelet transform and ridge-line peak picking.
//!
//! Peaks are found the way Du, Kibbe and Lin pick mass-spectrum peaks: local
//! maxima of every CWT row are chained into ridge lines from the widest
//! scale down to the narrowest, and a ridge is accepted when it is long
//! enough and its strongest coefficient stands out against the
//! smallest-scale coefficients around it.

use serde::{Deserialize, Serialize};

use crate::linalg::Matrix;
use crate::{Error, Result};

/// Mexican-hat wavelet sampled at `points` integer offsets centred on 0:
/// `ψ(t) = 2 / (√(3w) π^¼) · (1 − t²/w²) · exp(−t² / 2w²)`.
pub fn ricker(points: usize, width: f64) -> Result<Vec<f64>> {
    if !(width > 0.0) || !width.is_finite() {
        return Err(Error::BadWidth(width));
    }
    if points < 3 || points % 2 == 0 {
        return Err(Error::BadDims(format!("ricker needs an odd number of points >= 3, got {points}")));
    }
    let a = 2.0 / ((3.0 * width).sqrt() * std::f64::consts::PI.powf(0.25));
    let w2 = width * width;
    let half = (points / 2) as f64;
    Ok((0..points)
        .map(|i| {
            let t = i as f64 - half;
            let t2 = t * t;
            a * (1.0 - t2 / w2) * (-t2 / (2.0 * w2)).exp()
        })
        .collect())
}

/// Kernel actually convolved at `scale` for a signal of `n` samples: the
/// ricker wavelet on `min(10·scale, n)` points, rounded down to odd so it
/// stays centred, with its discrete mean removed so that truncating the
/// tails does not leak a DC response.
fn kernel(scale: f64, n: usize) -> Result<Vec<f64>> {
    let mut len = ((10.0 * scale).ceil() as usize).min(n);
    if len % 2 == 0 {
        len -= 1;
    }
    let mut k = ricker(len.max(3), scale)?;
    let m = k.iter().sum::<f64>() / k.len() as f64;
    k.iter_mut().for_each(|v| *v -= m);
    Ok(k)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CwtMatrix {
    /// `[scales × samples]`
    pub coefficients: Matrix,
    pub scales: Vec<f64>,
}

/// One row per scale, each the same-length, zero-padded convolution of the
/// signal with that scale's wavelet.
pub fn cwt_transform(signal: &[f64], scales: &[f64]) -> Result<CwtMatrix> {
    let n = signal.len();
    let widest = scales.iter().copied().fold(0.0_f64, f64::max);
    let need = 2 * widest.ceil() as usize + 1;
    if n < need.max(3) {
        return Err(Error::SignalTooShort { len: n, need: need.max(3) });
    }
    let mut coefficients = Matrix::zeros(scales.len(), n);
    for (r, &s) in scales.iter().enumerate() {
        let k = kernel(s, n)?;
        let half = k.len() / 2;
        let row = coefficients.row_mut(r);
        for (i, out) in row.iter_mut().enumerate() {
            // Kernel is even, so correlation and convolution coincide.
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(n);
            let k0 = lo + half - i;
            *out = signal[lo..hi].iter().zip(&k[k0..]).map(|(x, w)| x * w).sum();
        }
    }
    Ok(CwtMatrix { coefficients, scales: scales.to_vec() })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub index: usize,
    /// Scale at which the ridge responds most strongly.
    pub scale: f64,
    pub snr: f64,
    /// Signal value at `index`.
    pub height: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PeakConfig {
    pub scales: Vec<f64>,
    /// Minimum number of scales a ridge must span; `None` means
    /// `⌈|scales| / 4⌉`.
    pub min_ridge_length: Option<usize>,
    pub min_snr: f64,
    /// Scales a ridge may skip before it is closed.
    pub gap: usize,
    /// Width of the noise window in samples; `None` means `⌈n / 20⌉`.
    pub noise_window: Option<usize>,
    pub noise_percentile: f64,
}

impl Default for PeakConfig {
    fn default() -> Self {
        Self {
            scales: (1..=32).map(f64::from).collect(),
            min_ridge_length: None,
            min_snr: 3.0,
            gap: 2,
            noise_window: None,
            noise_percentile: 95.0,
        }
    }
}

#[derive(Debug, Clone)]
struct Ridge {
    /// `(row, col)` from widest to narrowest scale.
    points: Vec<(usize, usize)>,
    gap: usize,
}

impl Ridge {
    fn last_col(&self) -> usize {
        self.points.last().expect("ridges are never empty").1
    }
}

/// Strict-left, weak-right local maxima with positive value, so a plateau
/// reports its first sample.
fn row_maxima(row: &[f64]) -> Vec<usize> {
    (1..row.len().saturating_sub(1)).filter(|&i| row[i] > 0.0 && row[i] > row[i - 1] && row[i] >= row[i + 1]).collect()
}

fn link_ridges(cwt: &Matrix, max_dist: &[usize], gap: usize) -> Vec<Ridge> {
    let last = cwt.rows() - 1;
    let mut active: Vec<Ridge> =
        row_maxima(cwt.row(last)).into_iter().map(|c| Ridge { points: vec![(last, c)], gap: 0 }).collect();
    let mut done = Vec::new();
    for row in (0..last).rev() {
        let mut taken = vec![false; active.len()];
        let mut fresh = Vec::new();
        for col in row_maxima(cwt.row(row)) {
            // Closest unmatched ridge; ties go to the smaller column.
            let best = active
                .iter()
                .enumerate()
                .filter(|(k, _)| !taken[*k])
                .map(|(k, r)| (r.last_col().abs_diff(col), r.last_col(), k))
                .filter(|&(d, _, _)| d <= max_dist[row])
                .min();
            match best {
                Some((_, _, k)) => {
                    taken[k] = true;
                    active[k].points.push((row, col));
                    active[k].gap = 0;
                }
                None => fresh.push(Ridge { points: vec![(row, col)], gap: 0 }),
            }
        }
        let mut keep = Vec::with_capacity(active.len() + fresh.len());
        for (k, mut r) in active.into_iter().enumerate() {
            if !taken[k] {
                r.gap += 1;
            }
            if r.gap > gap {
                done.push(r);
            } else {
                keep.push(r);
            }
        }
        keep.extend(fresh);
        active = keep;
    }
    done.extend(active);
    done
}

/// Linear-interpolated percentile (`p` in `[0, 100]`) of unsorted values.
pub(crate) fn percentile(values: &mut [f64], p: f64) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n == 0 {
        return 0.0;
    }
    let pos = p / 100.0 * (n - 1) as f64;
    let i = pos.floor() as usize;
    let t = pos - i as f64;
    if i + 1 < n {
        values[i] + t * (values[i + 1] - values[i])
    } else {
        values[n - 1]
    }
}

/// Ridge-line peak detection; returns peaks sorted by index.
pub fn find_peaks_cwt(signal: &[f64], cfg: &PeakConfig) -> Result<Vec<Peak>> {
    if cfg.scales.is_empty() || cfg.scales.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::BadConfig("CWT scales must be non-empty and strictly ascending".into()));
    }
    let n = signal.len();
    let cwt = cwt_transform(signal, &cfg.scales)?;
    let m = &cwt.coefficients;
    let max_dist: Vec<usize> = cfg.scales.iter().map(|s| ((s / 4.0).ceil() as usize).max(1)).collect();
    let ridges = link_ridges(m, &max_dist, cfg.gap);

    let min_len = cfg.min_ridge_length.unwrap_or(cfg.scales.len().div_ceil(4));
    let window = cfg.noise_window.unwrap_or(n.div_ceil(20)).max(1);
    let edge = cfg.scales[cfg.scales.len() - 1].ceil() as usize;
    let base = m.row(0);
    // Noise estimates are floored relative to the whole transform so that a
    // noise-free region does not turn rounding residue into infinite SNR.
    let floor = m.data().iter().fold(0.0_f64, |a, v| a.max(v.abs())) * 1e-9;

    let mut peaks = Vec::new();
    for r in ridges {
        if r.points.len() < min_len {
            continue;
        }
        let index = r.points.last().expect("non-empty").1;
        if index < edge || index + edge >= n {
            continue;
        }
        let (row, col) = r
            .points
            .iter()
            .copied()
            .max_by(|a, b| m.get(a.0, a.1).total_cmp(&m.get(b.0, b.1)).then(b.0.cmp(&a.0)))
            .expect("non-empty");
        let strength = m.get(row, col);
        if strength <= 0.0 {
            continue;
        }
        let lo = index.saturating_sub(window / 2);
        let hi = (index + window.div_ceil(2)).min(n);
        let mut local: Vec<f64> = base[lo..hi].iter().map(|v| v.abs()).collect();
        let noise = percentile(&mut local, cfg.noise_percentile).max(floor);
        let snr = if noise > 0.0 { strength / noise } else { 0.0 };
        if snr >= cfg.min_snr {
            peaks.push(Peak { index, scale: cfg.scales[row], snr, height: signal[index] });
        }
    }
    peaks.sort_by_key(|p| p.index);
    peaks.dedup_by_key(|p| p.index);
    Ok(peaks)
}
