//! Row-major dense matrix and the few dense solves the regressors need.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Shape(format!("{rows}x{cols} matrix needs {} values, got {}", rows * cols, data.len())));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Shape("ragged rows".into()));
        }
        Ok(Self { rows: rows.len(), cols, data: rows.concat() })
    }

    pub fn from_columns(cols: &[Vec<f64>]) -> Result<Self> {
        let rows = cols.first().map_or(0, Vec::len);
        if cols.iter().any(|c| c.len() != rows) {
            return Err(Error::Shape("ragged columns".into()));
        }
        let mut data = Vec::with_capacity(rows * cols.len());
        for i in 0..rows {
            data.extend(cols.iter().map(|c| c[i]));
        }
        Ok(Self { rows, cols: cols.len(), data })
    }

    /// Single-column matrix.
    pub fn column_vector(values: &[f64]) -> Self {
        Self { rows: values.len(), cols: 1, data: values.to_vec() }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn columns(&self) -> Vec<Vec<f64>> {
        (0..self.cols).map(|j| self.column(j)).collect()
    }

    pub fn select_rows(&self, idx: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Matrix { rows: idx.len(), cols: self.cols, data }
    }

    pub fn select_cols(&self, idx: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(self.rows * idx.len());
        for i in 0..self.rows {
            let r = self.row(i);
            data.extend(idx.iter().map(|&j| r[j]));
        }
        Matrix { rows: self.rows, cols: idx.len(), data }
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.cols.max(1)).take(self.rows)
    }
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Population (1/N) variance.
pub fn variance(v: &[f64]) -> f64 {
    let m = mean(v);
    v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / v.len() as f64
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Outcome of a symmetric positive-definite solve.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub x: Vec<f64>,
    /// Ridge term that had to be added to the diagonal, if any.
    pub ridge: Option<f64>,
}

/// Relative pivot below which a Cholesky factor counts as singular.
const PIVOT_TOL: f64 = 1e-12;

fn cholesky_solve(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<Vec<f64>> {
    let scale = a.diagonal().iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let chol = a.clone().cholesky()?;
    let l = chol.l_dirty();
    let min_pivot = (0..a.nrows()).map(|i| l[(i, i)] * l[(i, i)]).fold(f64::INFINITY, f64::min);
    if a.nrows() > 0 && (scale == 0.0 || min_pivot < PIVOT_TOL * scale) {
        return None;
    }
    let x = chol.solve(b);
    x.iter().all(|v| v.is_finite()).then(|| x.iter().copied().collect())
}

/// Solve `(A + λI) x = b` for symmetric `A` (row-major `n×n`). Tries the
/// plain system first and adds `fallback_ridge` to the diagonal if the
/// Cholesky factorization is singular.
pub fn solve_spd(a: &[f64], b: &[f64], fallback_ridge: f64) -> Result<Solution> {
    let n = b.len();
    if a.len() != n * n {
        return Err(Error::Shape(format!("{n}x{n} system needs {} entries, got {}", n * n, a.len())));
    }
    let am = DMatrix::from_row_slice(n, n, a);
    let bv = DVector::from_column_slice(b);
    if let Some(x) = cholesky_solve(&am, &bv) {
        return Ok(Solution { x, ridge: None });
    }
    let ridged = &am + DMatrix::identity(n, n) * fallback_ridge;
    let chol = ridged.cholesky().ok_or(Error::SingularDesign)?;
    let x: Vec<f64> = chol.solve(&bv).iter().copied().collect();
    if x.iter().all(|v| v.is_finite()) {
        Ok(Solution { x, ridge: Some(fallback_ridge) })
    } else {
        Err(Error::SingularDesign)
    }
}

/// `XᵀX` and `Xᵀy` for column-centered data given as columns.
pub fn normal_equations(cols: &[Vec<f64>], y: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let p = cols.len();
    let mut xtx = vec![0.0; p * p];
    for i in 0..p {
        for j in i..p {
            let v = dot(&cols[i], &cols[j]);
            xtx[i * p + j] = v;
            xtx[j * p + i] = v;
        }
    }
    let xty = cols.iter().map(|c| dot(c, y)).collect();
    (xtx, xty)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn select_rows_and_cols() {
        let m = Matrix::new(3, 2, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        assert_eq!(m.select_rows(&[2, 0]).data(), &[5.0, 6.0, 1.0, 2.0]);
        assert_eq!(m.select_cols(&[1]).data(), &[2.0, 4.0, 6.0]);
        assert_eq!(m.column(0), vec![1.0, 3.0, 5.0]);
    }

    #[test]
    fn spd_solve_and_fallback() {
        let s = solve_spd(&[4.0, 2.0, 2.0, 3.0], &[2.0, 1.0], 1e-8).unwrap();
        assert!(s.ridge.is_none());
        assert!((s.x[0] - 0.5).abs() < 1e-12 && s.x[1].abs() < 1e-12);
        let s = solve_spd(&[1.0, 1.0, 1.0, 1.0], &[2.0, 2.0], 1e-8).unwrap();
        assert_eq!(s.ridge, Some(1e-8));
        assert!((s.x[0] + s.x[1] - 2.0).abs() < 1e-6);
    }
}
