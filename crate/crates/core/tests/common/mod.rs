//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use moldline::linalg::Matrix;
use moldline::rng;
use rand::Rng;

/// One hand-executed AdaBoost.R2 round on 1-D data with a stump learner.
#[derive(Debug, Clone, PartialEq)]
pub struct HandRound {
    pub sample: Vec<usize>,
    pub avg_loss: f64,
    pub beta: f64,
    pub estimator_weight: f64,
    pub weights: Vec<f64>,
}

/// Exhaustive stump search on a (possibly repeated) sample of 1-D points:
/// every midpoint is tried and scored by the children's summed squared
/// error; the lowest threshold wins ties. Returns a predictor.
pub fn brute_stump(x: &[f64], y: &[f64], sample: &[usize]) -> impl Fn(f64) -> f64 {
    let mean = |rows: &[usize]| rows.iter().map(|&i| y[i]).sum::<f64>() / rows.len() as f64;
    let sse = |rows: &[usize]| {
        let m = mean(rows);
        rows.iter().map(|&i| (y[i] - m) * (y[i] - m)).sum::<f64>()
    };
    let root = mean(sample);
    let parent = sse(sample);
    let mut xs: Vec<f64> = sample.iter().map(|&i| x[i]).collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    let mut best: Option<(f64, f64, f64, f64)> = None;
    for pair in xs.windows(2) {
        let thr = 0.5 * (pair[0] + pair[1]);
        let left: Vec<usize> = sample.iter().copied().filter(|&i| x[i] <= thr).collect();
        let right: Vec<usize> = sample.iter().copied().filter(|&i| x[i] > thr).collect();
        let s = sse(&left) + sse(&right);
        if best.map_or(true, |b| s < b.0) {
            best = Some((s, thr, mean(&left), mean(&right)));
        }
    }
    let split = best.filter(|b| b.0 < parent);
    move |q| match split {
        Some((_, thr, l, r)) => {
            if q <= thr {
                l
            } else {
                r
            }
        }
        None => root,
    }
}

/// AdaBoost.R2 with linear loss and learning rate 1, written out step by
/// step; a round with average loss of one half or more ends the run.
/// Resampling follows the documented protocol: per round, `n` uniforms from
/// the `adaboost` stream, each mapped to the first row whose cumulative
/// weight exceeds `u · Σw`.
pub fn adaboost_hand_trace(x: &[f64], y: &[f64], rounds: usize, seed: u64) -> Vec<HandRound> {
    let n = y.len();
    let mut w = vec![1.0 / n as f64; n];
    let mut r = rng::named(seed, "adaboost");
    let mut out = Vec::new();
    for _ in 0..rounds {
        let total: f64 = w.iter().sum();
        let mut cdf = Vec::new();
        let mut acc = 0.0;
        for v in &w {
            acc += v;
            cdf.push(acc);
        }
        let mut sample = Vec::new();
        for _ in 0..n {
            let u = r.random::<f64>() * total;
            let mut pick = n - 1;
            for (i, c) in cdf.iter().enumerate() {
                if *c > u {
                    pick = i;
                    break;
                }
            }
            sample.push(pick);
        }
        let stump = brute_stump(x, y, &sample);
        let err: Vec<f64> = (0..n).map(|i| (stump(x[i]) - y[i]).abs()).collect();
        let emax = err.iter().copied().fold(0.0, f64::max);
        let loss: Vec<f64> = err.iter().map(|e| e / emax).collect();
        let mut avg = 0.0;
        for i in 0..n {
            avg += loss[i] * w[i];
        }
        if avg >= 0.5 {
            break;
        }
        let beta = avg / (1.0 - avg);
        for i in 0..n {
            w[i] *= beta.powf(1.0 - loss[i]);
        }
        let total: f64 = w.iter().sum();
        for v in w.iter_mut() {
            *v /= total;
        }
        out.push(HandRound { sample, avg_loss: avg, beta, estimator_weight: (1.0 / beta).ln(), weights: w.clone() });
    }
    out
}

/// All `(distance, index)` pairs under the L1 metric sorted by distance and
/// then index, truncated to `k`.
pub fn brute_l1_neighbours(x: &Matrix, q: &[f64], k: usize) -> Vec<(f64, usize)> {
    let mut all = Vec::new();
    for i in 0..x.rows() {
        let mut d = 0.0;
        for (a, b) in x.row(i).iter().zip(q) {
            d += (a - b).abs();
        }
        all.push((d, i));
    }
    all.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    all.truncate(k);
    all
}

/// Symmetric GLCM counts by enumerating every pixel and offset directly.
pub fn brute_glcm_counts(img: &[Vec<usize>], levels: usize, offsets: &[(isize, isize)]) -> Vec<Vec<f64>> {
    let h = img.len() as isize;
    let w = img[0].len() as isize;
    let mut c = vec![vec![0.0; levels]; levels];
    for &(dy, dx) in offsets {
        for y in 0..h {
            for x in 0..w {
                let (y2, x2) = (y + dy, x + dx);
                if y2 < 0 || y2 >= h || x2 < 0 || x2 >= w {
                    continue;
                }
                let a = img[y as usize][x as usize];
                let b = img[y2 as usize][x2 as usize];
                c[a][b] += 1.0;
                c[b][a] += 1.0;
            }
        }
    }
    c
}

/// Second-largest eigenvalue of `Q[i][j] = Σ_k p(i,k) p(j,k) / (px(i) py(k))`
/// by power iteration on the symmetric form with the known top eigenvector
/// deflated. Returns the maximal correlation coefficient `√λ₂`.
pub fn max_corr_power_iteration(p: &[Vec<f64>]) -> f64 {
    let n = p.len();
    let px: Vec<f64> = (0..n).map(|i| p[i].iter().sum()).collect();
    let py: Vec<f64> = (0..n).map(|j| (0..n).map(|i| p[i][j]).sum()).collect();
    let live: Vec<usize> = (0..n).filter(|&i| px[i] > 0.0).collect();
    let m = live.len();
    if m < 2 {
        return 0.0;
    }
    let mut s = vec![vec![0.0; m]; m];
    for (a, &i) in live.iter().enumerate() {
        for (b, &j) in live.iter().enumerate() {
            let mut v = 0.0;
            for k in 0..n {
                if py[k] > 0.0 {
                    v += p[i][k] * p[j][k] / py[k];
                }
            }
            s[a][b] = v / (px[i] * px[j]).sqrt();
        }
    }
    // S has top eigenvalue 1 with eigenvector √px; remove it.
    let u: Vec<f64> = live.iter().map(|&i| px[i].sqrt()).collect();
    for a in 0..m {
        for b in 0..m {
            s[a][b] -= u[a] * u[b];
        }
    }
    // S − uuᵀ is positive semidefinite, so power iteration finds λ₂.
    let mut v: Vec<f64> = (0..m).map(|i| 1.0 + 0.1 * i as f64).collect();
    let mut lambda = 0.0;
    for _ in 0..20_000 {
        let mut nv = vec![0.0; m];
        for a in 0..m {
            for b in 0..m {
                nv[a] += s[a][b] * v[b];
            }
        }
        let norm = nv.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        nv.iter_mut().for_each(|x| *x /= norm);
        let new_lambda = norm;
        v = nv;
        if (new_lambda - lambda).abs() < 1e-15 {
            lambda = new_lambda;
            break;
        }
        lambda = new_lambda;
    }
    lambda.max(0.0).sqrt()
}
