use std::ops::Deref;

use crate::error::{Error, Result};

/// Dense row-major `f64` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::ShapeMismatch(format!(
                "{} values for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n_rows = rows.len();
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(n_rows * cols);
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != cols {
                return Err(Error::ShapeMismatch(format!(
                    "row {} has {} columns, expected {cols}",
                    i + 1,
                    row.len()
                )));
            }
            data.extend(row);
        }
        Ok(Self {
            rows: n_rows,
            cols,
            data,
        })
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    /// 0-based access.
    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.data[row * self.cols + col] = value;
    }

    #[inline]
    pub fn row(&self, row: usize) -> &[f64] {
        &self.data[row * self.cols..(row + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, row: usize) -> &mut [f64] {
        &mut self.data[row * self.cols..(row + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.cols.max(1)).take(self.rows)
    }

    pub fn max_value(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Position of the largest entry, scanning columns left to right and rows
    /// top to bottom within a column, so ties go to the smallest column and
    /// then the smallest row. Returns `(row, col, value)`, 0-based.
    pub fn argmax_col_major(&self) -> Option<(usize, usize, f64)> {
        let mut best: Option<(usize, usize, f64)> = None;
        for col in 0..self.cols {
            for row in 0..self.rows {
                let v = self.get(row, col);
                match best {
                    Some((_, _, b)) if v <= b => {}
                    _ => best = Some((row, col, v)),
                }
            }
        }
        best
    }

    pub(crate) fn check_finite(&self) -> Result<()> {
        match self.data.iter().position(|v| !v.is_finite()) {
            Some(i) => Err(Error::NonFinite {
                row: i / self.cols + 1,
                col: i % self.cols + 1,
            }),
            None => Ok(()),
        }
    }
}

/// Observations: rows are graph nodes, columns are time points.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix(Matrix);

impl DataMatrix {
    /// Requires at least one row, at least two columns and finite entries.
    pub fn new(values: Matrix) -> Result<Self> {
        if values.rows() == 0 {
            return Err(Error::ShapeMismatch("data matrix has no rows".into()));
        }
        if values.cols() < 2 {
            return Err(Error::param(
                "n",
                format!("need at least 2 time points, got {}", values.cols()),
            ));
        }
        values.check_finite()?;
        Ok(Self(values))
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        Self::new(Matrix::from_rows(rows)?)
    }

    pub fn p(&self) -> usize {
        self.0.rows()
    }

    pub fn n(&self) -> usize {
        self.0.cols()
    }

    pub fn into_inner(self) -> Matrix {
        self.0
    }
}

impl Deref for DataMatrix {
    type Target = Matrix;

    fn deref(&self) -> &Matrix {
        &self.0
    }
}
