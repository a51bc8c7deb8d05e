//! CART regression trees with squared-error splits.

use rand::seq::index::sample;
use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::linalg::Matrix;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    /// `None` grows until leaves are pure or too small to split.
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    /// Features tried per split; `None` tries all.
    pub max_features: Option<usize>,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self { max_depth: None, min_samples_split: 2, max_features: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Leaf {
        value: f64,
    },
    /// Rows with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

struct Grower<'a, 'r> {
    x: &'a Matrix,
    y: &'a [f64],
    params: TreeParams,
    rng: Option<&'r mut dyn RngCore>,
    nodes: Vec<Node>,
}

/// Best split as `(feature, threshold, n_left)` over the rows in `idx`,
/// which is left sorted by the chosen feature. Ties keep the lowest feature
/// and then the lowest threshold.
fn best_split(x: &Matrix, y: &[f64], idx: &mut [usize], features: &[usize]) -> Option<(usize, f64, usize)> {
    let n = idx.len();
    let mu = idx.iter().map(|&i| y[i]).sum::<f64>() / n as f64;
    let sse: f64 = idx.iter().map(|&i| (y[i] - mu) * (y[i] - mu)).sum();
    let total: f64 = idx.iter().map(|&i| y[i] - mu).sum();
    // With centered targets S_L²/n_L + S_R²/n_R is the drop in SSE.
    let mut best: Option<(f64, usize, f64, usize)> = None;
    for &f in features {
        idx.sort_by(|&a, &b| x.get(a, f).total_cmp(&x.get(b, f)).then(a.cmp(&b)));
        let mut left = 0.0;
        for k in 1..n {
            left += y[idx[k - 1]] - mu;
            let (a, b) = (x.get(idx[k - 1], f), x.get(idx[k], f));
            if a == b {
                continue;
            }
            let right = total - left;
            let score = left * left / k as f64 + right * right / (n - k) as f64;
            if best.map_or(true, |bst| score > bst.0) {
                let mut thr = 0.5 * (a + b);
                if thr >= b {
                    thr = a;
                }
                best = Some((score, f, thr, k));
            }
        }
    }
    let (score, f, thr, k) = best?;
    if score <= 1e-12 * sse {
        return None;
    }
    idx.sort_by(|&a, &b| x.get(a, f).total_cmp(&x.get(b, f)).then(a.cmp(&b)));
    Some((f, thr, k))
}

impl Grower<'_, '_> {
    fn grow(&mut self, idx: &mut [usize], depth: usize) -> usize {
        let id = self.nodes.len();
        let mean = idx.iter().map(|&i| self.y[i]).sum::<f64>() / idx.len() as f64;
        self.nodes.push(Node::Leaf { value: mean });
        let first = self.y[idx[0]];
        if self.params.max_depth.is_some_and(|d| depth >= d)
            || idx.len() < self.params.min_samples_split.max(2)
            || idx.iter().all(|&i| self.y[i] == first)
        {
            return id;
        }
        let p = self.x.cols();
        let features: Vec<usize> = match (self.params.max_features, self.rng.as_mut()) {
            (Some(m), Some(rng)) if m < p => {
                let mut f = sample(&mut **rng, p, m).into_vec();
                f.sort_unstable();
                f
            }
            _ => (0..p).collect(),
        };
        let Some((feature, threshold, k)) = best_split(self.x, self.y, idx, &features) else {
            return id;
        };
        let (l, r) = idx.split_at_mut(k);
        let left = self.grow(l, depth + 1);
        let right = self.grow(r, depth + 1);
        self.nodes[id] = Node::Split { feature, threshold, left, right };
        id
    }
}

impl Tree {
    /// Fits on the rows listed in `rows` (repeats allowed, as in a
    /// bootstrap sample). `rng` drives feature subsampling.
    pub fn fit_rows(x: &Matrix, y: &[f64], rows: &[usize], params: TreeParams, rng: Option<&mut dyn RngCore>) -> Result<Tree> {
        if x.rows() != y.len() {
            return Err(Error::Shape(format!("{} rows but {} targets", x.rows(), y.len())));
        }
        if rows.is_empty() {
            return Err(Error::TooFewValues { got: 0, need: 1 });
        }
        if params.max_features == Some(0) {
            return Err(Error::BadConfig("max_features must be at least 1".into()));
        }
        let mut idx = rows.to_vec();
        let mut g = Grower { x, y, params, rng, nodes: Vec::new() };
        g.grow(&mut idx, 0);
        Ok(Tree { nodes: g.nodes })
    }

    pub fn fit(x: &Matrix, y: &[f64], params: TreeParams) -> Result<Tree> {
        let rows: Vec<usize> = (0..x.rows()).collect();
        Self::fit_rows(x, y, &rows, params, None)
    }

    /// Index of the leaf reached by `row`.
    pub fn apply(&self, row: &[f64]) -> usize {
        let mut n = 0;
        loop {
            match &self.nodes[n] {
                Node::Leaf { .. } => return n,
                Node::Split { feature, threshold, left, right } => {
                    n = if row[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }

    pub fn predict_row(&self, row: &[f64]) -> f64 {
        match self.nodes[self.apply(row)] {
            Node::Leaf { value } => value,
            Node::Split { .. } => unreachable!("apply stops at leaves"),
        }
    }

    pub fn set_leaf(&mut self, node: usize, value: f64) {
        if let Node::Leaf { value: v } = &mut self.nodes[node] {
            *v = value;
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(t: &Tree, n: usize) -> usize {
            match &t.nodes[n] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(t, *left).max(walk(t, *right)),
            }
        }
        walk(self, 0)
    }
}
