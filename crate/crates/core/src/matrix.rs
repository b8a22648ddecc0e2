//! Dense row-major observation matrix.

use crate::prelude::*;

/// An `n x d` matrix of observations, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    /// Panics if `data.len() != rows * cols`.
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix shape mismatch");
        Matrix { rows, cols, data }
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Self {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            assert_eq!(r.len(), cols, "ragged rows");
            data.extend_from_slice(r);
        }
        Matrix { rows: rows.len(), cols, data }
    }

    pub fn from_columns<C: AsRef<[f64]>>(columns: &[C]) -> Self {
        let cols = columns.len();
        let rows = columns.first().map_or(0, |c| c.as_ref().len());
        let mut m = Matrix::zeros(rows, cols);
        for (j, c) in columns.iter().enumerate() {
            let c = c.as_ref();
            assert_eq!(c.len(), rows, "ragged columns");
            for (i, &v) in c.iter().enumerate() {
                m.data[i * cols + j] = v;
            }
        }
        m
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn select_rows(&self, rows: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(rows.len() * self.cols);
        for &i in rows {
            data.extend_from_slice(self.row(i));
        }
        Matrix { rows: rows.len(), cols: self.cols, data }
    }

    pub fn select_columns(&self, cols: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(self.rows * cols.len());
        for i in 0..self.rows {
            let row = self.row(i);
            data.extend(cols.iter().map(|&j| row[j]));
        }
        Matrix { rows: self.rows, cols: cols.len(), data }
    }

    /// Appends `y` as an extra last column.
    pub fn with_column(&self, y: &[f64]) -> Matrix {
        assert_eq!(y.len(), self.rows);
        let mut data = Vec::with_capacity(self.rows * (self.cols + 1));
        for (i, &v) in y.iter().enumerate() {
            data.extend_from_slice(self.row(i));
            data.push(v);
        }
        Matrix { rows: self.rows, cols: self.cols + 1, data }
    }

    /// Shifts and scales every column to zero mean and unit variance.
    /// Constant columns are only centered.
    pub fn standardized(&self) -> Matrix {
        let mut out = self.clone();
        if self.rows == 0 {
            return out;
        }
        let n = self.rows as f64;
        for j in 0..self.cols {
            let mean = (0..self.rows).map(|i| self.get(i, j)).sum::<f64>() / n;
            let var = (0..self.rows).map(|i| (self.get(i, j) - mean).powi(2)).sum::<f64>() / n;
            let sd = var.sqrt();
            let scale = if sd > 0.0 && sd.is_finite() { 1.0 / sd } else { 1.0 };
            for i in 0..self.rows {
                out.set(i, j, (self.get(i, j) - mean) * scale);
            }
        }
        out
    }
}

/// Standardizes a single vector (see [`Matrix::standardized`]).
pub fn standardize(v: &[f64]) -> Vec<f64> {
    if v.is_empty() {
        return Vec::new();
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let sd = (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
    let scale = if sd > 0.0 && sd.is_finite() { 1.0 / sd } else { 1.0 };
    v.iter().map(|x| (x - mean) * scale).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn columns_and_rows_agree() {
        let m = Matrix::from_columns(&[vec![1.0, 2.0], vec![3.0, 4.0]]);
        assert_eq!(m.row(0), &[1.0, 3.0]);
        assert_eq!(m.column(1), vec![3.0, 4.0]);
        assert_eq!(m.select_columns(&[1]).row(1), &[4.0]);
        assert_eq!(m.with_column(&[5.0, 6.0]).row(1), &[2.0, 4.0, 6.0]);
    }

    #[test]
    fn standardized_columns() {
        let m = Matrix::from_columns(&[vec![1.0, 2.0, 3.0], vec![7.0, 7.0, 7.0]]);
        let s = m.standardized();
        let c0 = s.column(0);
        assert!((c0.iter().sum::<f64>()).abs() < 1e-12);
        assert!((c0.iter().map(|v| v * v).sum::<f64>() / 3.0 - 1.0).abs() < 1e-12);
        assert_eq!(s.column(1), vec![0.0, 0.0, 0.0]);
    }
}
