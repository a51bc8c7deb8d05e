//! Order statistics and moments of a sample.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const STAT_NAMES: [&str; 10] = ["mean", "median", "std", "min", "max", "q75", "q90", "mode", "skewness", "kurtosis"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrderStats {
    /// In [`STAT_NAMES`] order.
    pub values: [f64; 10],
    /// The sample had zero variance; skewness and kurtosis were set to 0.
    pub zero_variance: bool,
}

/// Quantile `q ∈ [0, 1]` of sorted data, interpolating linearly between the
/// closest ranks.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    let pos = q * (n - 1) as f64;
    let i = pos.floor() as usize;
    let t = pos - i as f64;
    if i + 1 < n && t > 0.0 {
        sorted[i] + t * (sorted[i + 1] - sorted[i])
    } else {
        sorted[i.min(n - 1)]
    }
}

/// Centre of the tallest bin of a `⌈√N⌉`-bin histogram over `[min, max]`;
/// ties go to the lowest bin.
fn histogram_mode(sorted: &[f64]) -> f64 {
    let (lo, hi) = (sorted[0], sorted[sorted.len() - 1]);
    if hi == lo {
        return lo;
    }
    let bins = (sorted.len() as f64).sqrt().ceil() as usize;
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for &v in sorted {
        counts[(((v - lo) / width) as usize).min(bins - 1)] += 1;
    }
    let best = counts.iter().enumerate().fold(0, |b, (i, &c)| if c > counts[b] { i } else { b });
    lo + (best as f64 + 0.5) * width
}

/// Mean, median, population std, min, max, q75, q90, histogram mode,
/// skewness `m3/m2^1.5` and excess kurtosis `m4/m2² − 3`.
pub fn order_stats(values: &[f64]) -> Result<OrderStats> {
    if values.len() < 2 {
        return Err(Error::TooFewValues { got: values.len(), need: 2 });
    }
    let n = values.len() as f64;
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mean = values.iter().sum::<f64>() / n;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &v in values {
        let d = v - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    let zero_variance = m2 == 0.0;
    let (skew, kurt) = if zero_variance { (0.0, 0.0) } else { (m3 / m2.powf(1.5), m4 / (m2 * m2) - 3.0) };
    Ok(OrderStats {
        values: [
            mean,
            quantile_sorted(&sorted, 0.5),
            m2.sqrt(),
            sorted[0],
            sorted[sorted.len() - 1],
            quantile_sorted(&sorted, 0.75),
            quantile_sorted(&sorted, 0.9),
            histogram_mode(&sorted),
            skew,
            kurt,
        ],
        zero_variance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_to_five() {
        let s = order_stats(&[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap().values;
        assert_eq!(&s[..2], &[3.0, 3.0]);
        assert_eq!((s[3], s[4], s[5]), (1.0, 5.0, 4.0));
        assert!((s[6] - 4.6).abs() < 1e-12);
        assert!(s[8].abs() < 1e-12);
    }

    #[test]
    fn constant_is_flagged() {
        let s = order_stats(&[2.0; 5]).unwrap();
        assert!(s.zero_variance);
        assert_eq!((s.values[2], s.values[7], s.values[8], s.values[9]), (0.0, 2.0, 0.0, 0.0));
        assert!(matches!(order_stats(&[1.0]), Err(Error::TooFewValues { .. })));
    }
}
