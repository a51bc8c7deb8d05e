//! Resampling, standardization and image downscaling.

use serde::{Deserialize, Serialize};

use crate::dataset::ThermoImage;
use crate::linalg::Matrix;
use crate::{Error, Result};

/// Linear interpolation onto `n_out` uniformly spaced positions spanning the
/// input; both endpoints are reproduced exactly.
pub fn resample_linear(samples: &[f64], n_out: usize) -> Result<Vec<f64>> {
    if samples.is_empty() {
        return Err(Error::EmptyTrace);
    }
    if n_out < 2 {
        return Err(Error::BadDims(format!("resample target must be at least 2, got {n_out}")));
    }
    let n = samples.len();
    if n == 1 {
        return Ok(vec![samples[0]; n_out]);
    }
    let span = (n - 1) as f64;
    let denom = (n_out - 1) as f64;
    let mut out: Vec<f64> = (0..n_out)
        .map(|k| {
            let q = k as f64 * span / denom;
            let i = (q.floor() as usize).min(n - 2);
            let t = q - i as f64;
            if t == 0.0 {
                samples[i]
            } else {
                samples[i] + t * (samples[i + 1] - samples[i])
            }
        })
        .collect();
    out[n_out - 1] = samples[n - 1];
    Ok(out)
}

/// Mean and population standard deviation of one variable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: f64,
    pub std: f64,
}

impl Standardizer {
    pub fn fit(values: &[f64]) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::TooFewValues { got: values.len(), need: 2 });
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt();
        if std == 0.0 {
            return Err(Error::DegenerateConstant);
        }
        Ok(Self { mean, std })
    }

    pub fn apply(&self, values: &[f64]) -> Result<Vec<f64>> {
        standardize_apply(values, self.mean, self.std)
    }

    pub fn inverse(&self, z: &[f64]) -> Result<Vec<f64>> {
        inverse_apply(z, self.mean, self.std)
    }
}

pub fn standardize_apply(values: &[f64], mean: f64, std: f64) -> Result<Vec<f64>> {
    if std == 0.0 {
        return Err(Error::ZeroStd);
    }
    Ok(values.iter().map(|v| (v - mean) / std).collect())
}

pub fn inverse_apply(z: &[f64], mean: f64, std: f64) -> Result<Vec<f64>> {
    if std == 0.0 {
        return Err(Error::ZeroStd);
    }
    Ok(z.iter().map(|v| v * std + mean).collect())
}

/// Per-column standardization fitted on training rows.
///
/// Missing entries (NaN) are ignored when fitting and mapped to 0, the
/// column mean, when applied. Constant columns keep std 1 so they map to 0
/// instead of dividing by zero; they are listed in `constant`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnScaler {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
    pub constant: Vec<usize>,
}

impl ColumnScaler {
    pub fn fit(x: &Matrix) -> Result<Self> {
        if x.rows() < 2 {
            return Err(Error::TooFewValues { got: x.rows(), need: 2 });
        }
        let mut means = Vec::with_capacity(x.cols());
        let mut stds = Vec::with_capacity(x.cols());
        let mut constant = Vec::new();
        for j in 0..x.cols() {
            let col: Vec<f64> = x.column(j).into_iter().filter(|v| !v.is_nan()).collect();
            if col.is_empty() {
                means.push(0.0);
                stds.push(1.0);
                constant.push(j);
                continue;
            }
            let n = col.len() as f64;
            let m = col.iter().sum::<f64>() / n;
            let s = (col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n).sqrt();
            means.push(m);
            if s > 0.0 {
                stds.push(s);
            } else {
                stds.push(1.0);
                constant.push(j);
            }
        }
        Ok(Self { means, stds, constant })
    }

    pub fn apply(&self, x: &Matrix) -> Result<Matrix> {
        if x.cols() != self.means.len() {
            return Err(Error::Shape(format!("scaler fitted on {} columns, got {}", self.means.len(), x.cols())));
        }
        let mut out = x.clone();
        for i in 0..out.rows() {
            for (j, v) in out.row_mut(i).iter_mut().enumerate() {
                *v = if v.is_nan() { 0.0 } else { (*v - self.means[j]) / self.stds[j] };
            }
        }
        Ok(out)
    }
}

/// Area-averaging resize: every output pixel is the mean of its (possibly
/// fractional) source footprint.
pub fn downscale_image(img: &ThermoImage, out_w: usize, out_h: usize) -> Result<ThermoImage> {
    if out_w == 0 || out_h == 0 || out_w > img.width || out_h > img.height {
        return Err(Error::BadDims(format!("cannot reduce {}x{} to {out_w}x{out_h}", img.width, img.height)));
    }
    let wy = footprints(img.height, out_h);
    let wx = footprints(img.width, out_w);
    let area = (img.height as f64 / out_h as f64) * (img.width as f64 / out_w as f64);
    let mut pixels = vec![0.0; out_w * out_h];
    for (oy, rows) in wy.iter().enumerate() {
        for (ox, cols) in wx.iter().enumerate() {
            let mut acc = 0.0;
            for &(y, fy) in rows {
                let mut line = 0.0;
                for &(x, fx) in cols {
                    line += fx * img.get(y, x);
                }
                acc += fy * line;
            }
            pixels[oy * out_w + ox] = acc / area;
        }
    }
    ThermoImage::new(out_w, out_h, pixels)
}

/// For each output cell, the source indices it overlaps and the overlap
/// length in source units.
fn footprints(n_in: usize, n_out: usize) -> Vec<Vec<(usize, f64)>> {
    let scale = n_in as f64 / n_out as f64;
    (0..n_out)
        .map(|o| {
            let (lo, hi) = (o as f64 * scale, (o + 1) as f64 * scale);
            let first = lo.floor() as usize;
            let last = (hi.ceil() as usize).min(n_in);
            (first..last)
                .filter_map(|i| {
                    let w = hi.min((i + 1) as f64) - lo.max(i as f64);
                    (w > 0.0).then_some((i, w))
                })
                .collect()
        })
        .collect()
}
