//! Gray-level co-occurrence matrices and Haralick's fourteen texture
//! features.
//!
//! Gray levels are 0-based, logs are natural, and `0 · ln 0 = 0`.

use serde::{Deserialize, Serialize};

use crate::dataset::ThermoImage;
use crate::{Error, Result};

/// Image quantized to `levels` gray levels, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuantizedImage {
    pub width: usize,
    pub height: usize,
    pub levels: usize,
    pub data: Vec<usize>,
}

impl QuantizedImage {
    pub fn new(width: usize, height: usize, levels: usize, data: Vec<usize>) -> Result<Self> {
        if data.len() != width * height || data.iter().any(|&v| v >= levels) {
            return Err(Error::BadDims(format!("{width}x{height} image with {levels} levels")));
        }
        Ok(Self { width, height, levels, data })
    }
}

/// Linear binning between the image's min and max; the top bin is closed
/// on the right. A constant image maps to level 0.
pub fn quantize(img: &ThermoImage, levels: usize) -> QuantizedImage {
    assert!(levels >= 2, "need at least two gray levels");
    let lo = img.pixels.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = img.pixels.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    let data = img
        .pixels
        .iter()
        .map(|&v| if span > 0.0 { (((v - lo) / span * levels as f64).floor() as usize).min(levels - 1) } else { 0 })
        .collect();
    QuantizedImage { width: img.width, height: img.height, levels, data }
}

/// Symmetric, normalized co-occurrence matrix `p(i, j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Glcm {
    pub levels: usize,
    /// Row-major `levels × levels`.
    pub p: Vec<f64>,
}

impl Glcm {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.p[i * self.levels + j]
    }

    /// Build from raw (not necessarily symmetric) counts: symmetrize and
    /// normalize.
    pub fn from_counts(levels: usize, counts: &[f64]) -> Result<Self> {
        if counts.len() != levels * levels {
            return Err(Error::BadDims(format!("{levels}x{levels} GLCM needs {} counts", levels * levels)));
        }
        let mut p = vec![0.0; counts.len()];
        for i in 0..levels {
            for j in 0..levels {
                p[i * levels + j] = counts[i * levels + j] + counts[j * levels + i];
            }
        }
        let total: f64 = p.iter().sum();
        if !(total > 0.0) {
            return Err(Error::NoValidPairs);
        }
        p.iter_mut().for_each(|v| *v /= total);
        Ok(Self { levels, p })
    }
}

/// Accumulate `(i, j)` and `(j, i)` for every in-bounds pixel pair under
/// each `(dy, dx)` offset, then normalize.
pub fn glcm(q: &QuantizedImage, offsets: &[(isize, isize)]) -> Result<Glcm> {
    if offsets.is_empty() {
        return Err(Error::BadConfig("GLCM needs at least one offset".into()));
    }
    let g = q.levels;
    let mut counts = vec![0.0; g * g];
    let (h, w) = (q.height as isize, q.width as isize);
    for &(dy, dx) in offsets {
        for y in 0..h {
            let y2 = y + dy;
            if y2 < 0 || y2 >= h {
                continue;
            }
            for x in 0..w {
                let x2 = x + dx;
                if x2 < 0 || x2 >= w {
                    continue;
                }
                let a = q.data[(y * w + x) as usize];
                let b = q.data[(y2 * w + x2) as usize];
                counts[a * g + b] += 1.0;
            }
        }
    }
    Glcm::from_counts(g, &counts)
}

pub const FEATURE_NAMES: [&str; 14] = [
    "energy",
    "contrast",
    "correlation",
    "variance",
    "inverse_difference_moment",
    "sum_average",
    "sum_variance",
    "sum_entropy",
    "entropy",
    "difference_variance",
    "difference_entropy",
    "info_correlation_1",
    "info_correlation_2",
    "max_correlation_coefficient",
];

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct HaralickFlags {
    /// A marginal had zero variance; correlation was set to 0.
    pub degenerate_correlation: bool,
    /// The eigen-solve behind f14 hit its sweep limit.
    pub eigen_not_converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HaralickFeatures {
    /// f1..f14 in [`FEATURE_NAMES`] order.
    pub values: [f64; 14],
    pub flags: HaralickFlags,
}

fn xlnx(x: f64) -> f64 {
    if x > 0.0 {
        x * x.ln()
    } else {
        0.0
    }
}

/// The fourteen features of a single GLCM.
pub fn haralick_features(g: &Glcm) -> HaralickFeatures {
    let n = g.levels;
    let mut flags = HaralickFlags::default();
    let px: Vec<f64> = (0..n).map(|i| (0..n).map(|j| g.get(i, j)).sum()).collect();
    let py: Vec<f64> = (0..n).map(|j| (0..n).map(|i| g.get(i, j)).sum()).collect();
    let mu_x: f64 = px.iter().enumerate().map(|(i, p)| i as f64 * p).sum();
    let mu_y: f64 = py.iter().enumerate().map(|(j, p)| j as f64 * p).sum();
    let var_x: f64 = px.iter().enumerate().map(|(i, p)| (i as f64 - mu_x).powi(2) * p).sum();
    let var_y: f64 = py.iter().enumerate().map(|(j, p)| (j as f64 - mu_y).powi(2) * p).sum();

    let mut energy = 0.0;
    let mut contrast = 0.0;
    let mut cross = 0.0;
    let mut idm = 0.0;
    let mut entropy = 0.0;
    let mut hxy1 = 0.0;
    let mut hxy2 = 0.0;
    let mut p_sum = vec![0.0; 2 * n - 1];
    let mut p_diff = vec![0.0; n];
    for i in 0..n {
        for j in 0..n {
            let p = g.get(i, j);
            let d = i.abs_diff(j);
            energy += p * p;
            contrast += (d * d) as f64 * p;
            cross += (i * j) as f64 * p;
            idm += p / (1.0 + (d * d) as f64);
            entropy -= xlnx(p);
            let pxy = px[i] * py[j];
            if p > 0.0 {
                hxy1 -= p * pxy.ln();
            }
            hxy2 -= xlnx(pxy);
            p_sum[i + j] += p;
            p_diff[d] += p;
        }
    }
    let correlation = if var_x > 0.0 && var_y > 0.0 {
        (cross - mu_x * mu_y) / (var_x * var_y).sqrt()
    } else {
        flags.degenerate_correlation = true;
        0.0
    };
    let sum_average: f64 = p_sum.iter().enumerate().map(|(k, p)| k as f64 * p).sum();
    // Haralick's printed f7 uses f8 here; the sum average is the centre
    // that makes it a variance.
    let sum_variance: f64 = p_sum.iter().enumerate().map(|(k, p)| (k as f64 - sum_average).powi(2) * p).sum();
    let sum_entropy: f64 = -p_sum.iter().map(|&p| xlnx(p)).sum::<f64>();
    let diff_mean: f64 = p_diff.iter().enumerate().map(|(k, p)| k as f64 * p).sum();
    let diff_variance: f64 = p_diff.iter().enumerate().map(|(k, p)| (k as f64 - diff_mean).powi(2) * p).sum();
    let diff_entropy: f64 = -p_diff.iter().map(|&p| xlnx(p)).sum::<f64>();
    let hx: f64 = -px.iter().map(|&p| xlnx(p)).sum::<f64>();
    let hy: f64 = -py.iter().map(|&p| xlnx(p)).sum::<f64>();
    let hmax = hx.max(hy);
    let imc1 = if hmax > 0.0 { (entropy - hxy1) / hmax } else { 0.0 };
    let imc2 = (1.0 - (-2.0 * (hxy2 - entropy)).exp()).max(0.0).sqrt();
    let (lambda2, converged) = second_eigenvalue(g, &px, &py);
    flags.eigen_not_converged = !converged;

    HaralickFeatures {
        values: [
            energy,
            contrast,
            correlation,
            var_x,
            idm,
            sum_average,
            sum_variance,
            sum_entropy,
            entropy,
            diff_variance,
            diff_entropy,
            imc1,
            imc2,
            lambda2.max(0.0).sqrt(),
        ],
        flags,
    }
}

/// Symmetric form `S = Dx^{-1/2} P Dy^{-1} Pᵀ Dx^{-1/2}` of Haralick's `Q`
/// matrix, restricted to gray levels with non-zero marginals. `S` and `Q`
/// share eigenvalues; the largest is 1.
pub fn q_matrix_symmetric(g: &Glcm, px: &[f64], py: &[f64]) -> (Vec<usize>, Vec<f64>) {
    let n = g.levels;
    let live: Vec<usize> = (0..n).filter(|&i| px[i] > 0.0).collect();
    let m = live.len();
    let mut s = vec![0.0; m * m];
    for (a, &i) in live.iter().enumerate() {
        for (b, &j) in live.iter().enumerate().skip(a) {
            let v: f64 =
                (0..n).filter(|&k| py[k] > 0.0).map(|k| g.get(i, k) * g.get(j, k) / py[k]).sum::<f64>() / (px[i] * px[j]).sqrt();
            s[a * m + b] = v;
            s[b * m + a] = v;
        }
    }
    (live, s)
}

fn second_eigenvalue(g: &Glcm, px: &[f64], py: &[f64]) -> (f64, bool) {
    let (live, s) = q_matrix_symmetric(g, px, py);
    if live.len() < 2 {
        return (0.0, true);
    }
    let (mut eig, converged) = jacobi_eigenvalues(s, live.len(), 1e-10, 100);
    eig.sort_by(|a, b| b.total_cmp(a));
    (eig[1], converged)
}

/// Cyclic Jacobi rotations on a symmetric `n×n` matrix until the
/// off-diagonal Frobenius norm drops below `tol` (relative to the full
/// norm). Returns the diagonal and whether it converged.
pub fn jacobi_eigenvalues(mut a: Vec<f64>, n: usize, tol: f64, max_sweeps: usize) -> (Vec<f64>, bool) {
    let total: f64 = a.iter().map(|v| v * v).sum::<f64>().sqrt();
    let off = |a: &[f64]| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += a[i * n + j] * a[i * n + j];
                }
            }
        }
        s.sqrt()
    };
    let mut converged = false;
    for _ in 0..max_sweeps {
        if off(&a) <= tol * total.max(f64::MIN_POSITIVE) {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
            }
        }
    }
    if !converged {
        converged = off(&a) <= tol * total.max(f64::MIN_POSITIVE);
    }
    ((0..n).map(|i| a[i * n + i]).collect(), converged)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HaralickConfig {
    pub levels: usize,
    /// `(dy, dx)` offsets; features are computed per offset and averaged.
    pub offsets: Vec<(isize, isize)>,
}

impl Default for HaralickConfig {
    fn default() -> Self {
        Self { levels: 8, offsets: vec![(0, 1), (1, 0), (1, 1), (1, -1)] }
    }
}

/// Per-offset features averaged over the configured offsets. Offsets with
/// no in-bounds pair on this image are skipped.
pub fn image_haralick(img: &ThermoImage, cfg: &HaralickConfig) -> Result<HaralickFeatures> {
    let q = quantize(img, cfg.levels);
    let mut acc = [0.0; 14];
    let mut flags = HaralickFlags::default();
    let mut used = 0;
    for &off in &cfg.offsets {
        let g = match glcm(&q, &[off]) {
            Ok(g) => g,
            Err(Error::NoValidPairs) => continue,
            Err(e) => return Err(e),
        };
        let f = haralick_features(&g);
        for (a, v) in acc.iter_mut().zip(f.values) {
            *a += v;
        }
        flags.degenerate_correlation |= f.flags.degenerate_correlation;
        flags.eigen_not_converged |= f.flags.eigen_not_converged;
        used += 1;
    }
    if used == 0 {
        return Err(Error::NoValidPairs);
    }
    acc.iter_mut().for_each(|v| *v /= used as f64);
    Ok(HaralickFeatures { values: acc, flags })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantize_bins() {
        let img = ThermoImage::new(3, 1, vec![0.0, 0.5, 1.0]).unwrap();
        assert_eq!(quantize(&img, 2).data, vec![0, 1, 1]);
        let img = ThermoImage::new(8, 1, (0..8).map(f64::from).collect()).unwrap();
        assert_eq!(quantize(&img, 8).data, (0..8).collect::<Vec<_>>());
        let flat = ThermoImage::new(2, 2, vec![3.0; 4]).unwrap();
        assert_eq!(quantize(&flat, 8).data, vec![0; 4]);
    }

    #[test]
    fn uniform_glcm_entropy() {
        let g = Glcm { levels: 4, p: vec![1.0 / 16.0; 16] };
        let f = haralick_features(&g);
        assert!((f.values[8] - 2.0 * 4.0_f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn jacobi_diagonalizes() {
        let (mut e, ok) = jacobi_eigenvalues(vec![2.0, 1.0, 1.0, 2.0], 2, 1e-12, 50);
        e.sort_by(f64::total_cmp);
        assert!(ok);
        assert!((e[0] - 1.0).abs() < 1e-12 && (e[1] - 3.0).abs() < 1e-12);
    }
}
