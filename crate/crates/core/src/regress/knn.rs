//! k-nearest-neighbour regression over a kd-tree with Minkowski distance.

use serde::{Deserialize, Serialize};

use crate::linalg::Matrix;
use crate::{Error, Result};

const LEAF_SIZE: usize = 8;

pub fn minkowski(a: &[f64], b: &[f64], p: f64) -> f64 {
    if p == 1.0 {
        a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
    } else if p == 2.0 {
        a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
    } else {
        a.iter().zip(b).map(|(x, y)| (x - y).abs().powf(p)).sum::<f64>().powf(1.0 / p)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum KdNode {
    Leaf { items: Vec<usize> },
    Split { dim: usize, value: f64, left: usize, right: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KdTree {
    points: Matrix,
    nodes: Vec<KdNode>,
}

impl KdTree {
    pub fn build(points: Matrix) -> Self {
        let mut t = KdTree { points, nodes: Vec::new() };
        let idx: Vec<usize> = (0..t.points.rows()).collect();
        t.grow(idx);
        t
    }

    fn grow(&mut self, mut idx: Vec<usize>) -> usize {
        let id = self.nodes.len();
        self.nodes.push(KdNode::Leaf { items: Vec::new() });
        if idx.len() <= LEAF_SIZE || self.points.cols() == 0 {
            self.nodes[id] = KdNode::Leaf { items: idx };
            return id;
        }
        // Split on the dimension of largest spread at the median value.
        let (dim, spread) = (0..self.points.cols())
            .map(|d| {
                let (lo, hi) = idx.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| {
                    let v = self.points.get(i, d);
                    (lo.min(v), hi.max(v))
                });
                (d, hi - lo)
            })
            .fold((0, -1.0), |best, c| if c.1 > best.1 { c } else { best });
        if spread <= 0.0 {
            self.nodes[id] = KdNode::Leaf { items: idx };
            return id;
        }
        idx.sort_by(|&a, &b| self.points.get(a, dim).total_cmp(&self.points.get(b, dim)).then(a.cmp(&b)));
        // Left holds values strictly below the split value, right the rest.
        let median = self.points.get(idx[idx.len() / 2], dim);
        let mut mid = idx.partition_point(|&i| self.points.get(i, dim) < median);
        if mid == 0 {
            mid = idx.partition_point(|&i| self.points.get(i, dim) <= median);
        }
        let value = self.points.get(idx[mid], dim);
        let right_idx = idx.split_off(mid);
        let left = self.grow(idx);
        let right = self.grow(right_idx);
        self.nodes[id] = KdNode::Split { dim, value, left, right };
        id
    }

    /// The `k` nearest points as `(distance, index)`, ordered by distance and
    /// then by index.
    pub fn query(&self, q: &[f64], k: usize, p: f64) -> Vec<(f64, usize)> {
        let mut best: Vec<(f64, usize)> = Vec::with_capacity(k + 1);
        if k > 0 {
            self.visit(0, q, k, p, &mut best);
        }
        best
    }

    fn visit(&self, node: usize, q: &[f64], k: usize, p: f64, best: &mut Vec<(f64, usize)>) {
        match &self.nodes[node] {
            KdNode::Leaf { items } => {
                for &i in items {
                    let d = minkowski(q, self.points.row(i), p);
                    let cand = (d, i);
                    if best.len() == k && !less(cand, best[k - 1]) {
                        continue;
                    }
                    let pos = best.partition_point(|&b| less(b, cand));
                    best.insert(pos, cand);
                    best.truncate(k);
                }
            }
            KdNode::Split { dim, value, left, right } => {
                let diff = q[*dim] - value;
                let (near, far) = if diff < 0.0 { (*left, *right) } else { (*right, *left) };
                self.visit(near, q, k, p, best);
                // A coordinate gap bounds every Minkowski distance from below.
                if best.len() < k || diff.abs() <= best[k - 1].0 {
                    self.visit(far, q, k, p, best);
                }
            }
        }
    }
}

fn less(a: (f64, usize), b: (f64, usize)) -> bool {
    a.0 < b.0 || (a.0 == b.0 && a.1 < b.1)
}

/// Exhaustive search with the same ordering as [`KdTree::query`].
pub fn brute_force(points: &Matrix, q: &[f64], k: usize, p: f64) -> Vec<(f64, usize)> {
    let mut all: Vec<(f64, usize)> = points.iter_rows().enumerate().map(|(i, r)| (minkowski(q, r, p), i)).collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    all.truncate(k);
    all
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    pub k: usize,
    pub p: f64,
    tree: KdTree,
    targets: Vec<f64>,
}

impl KnnModel {
    pub fn fit(x: &Matrix, y: &[f64], k: usize, p: f64) -> Result<Self> {
        if k == 0 || !(p >= 1.0) {
            return Err(Error::BadConfig(format!("knn needs k >= 1 and p >= 1, got k={k} p={p}")));
        }
        if x.rows() != y.len() {
            return Err(Error::Shape(format!("{} rows but {} targets", x.rows(), y.len())));
        }
        if x.rows() < k {
            return Err(Error::TooFewValues { got: x.rows(), need: k });
        }
        Ok(KnnModel { k, p, tree: KdTree::build(x.clone()), targets: y.to_vec() })
    }

    pub fn neighbours(&self, q: &[f64]) -> Vec<(f64, usize)> {
        self.tree.query(q, self.k, self.p)
    }

    /// Unweighted mean of the neighbours' targets.
    pub fn predict_row(&self, q: &[f64]) -> f64 {
        let nb = self.neighbours(q);
        nb.iter().map(|&(_, i)| self.targets[i]).sum::<f64>() / nb.len() as f64
    }
}
