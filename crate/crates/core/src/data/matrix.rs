use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense row-major matrix of encoded features with column names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    n_rows: usize,
    n_cols: usize,
    values: Vec<f64>,
    names: Vec<String>,
}

impl FeatureMatrix {
    pub fn new(n_rows: usize, names: Vec<String>, values: Vec<f64>) -> Result<Self> {
        let n_cols = names.len();
        if values.len() != n_rows * n_cols {
            return Err(Error::WidthMismatch {
                expected: n_rows * n_cols,
                actual: values.len(),
            });
        }
        Ok(Self {
            n_rows,
            n_cols,
            values,
            names,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n_cols = rows.first().map_or(0, Vec::len);
        let names = (0..n_cols).map(|j| format!("x{j}")).collect();
        let mut values = Vec::with_capacity(rows.len() * n_cols);
        for r in rows {
            if r.len() != n_cols {
                return Err(Error::WidthMismatch {
                    expected: n_cols,
                    actual: r.len(),
                });
            }
            values.extend_from_slice(r);
        }
        Self::new(rows.len(), names, values)
    }

    pub fn empty(names: Vec<String>) -> Self {
        Self {
            n_rows: 0,
            n_cols: names.len(),
            values: Vec::new(),
            names,
        }
    }

    pub fn with_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.n_cols {
            return Err(Error::WidthMismatch {
                expected: self.n_cols,
                actual: names.len(),
            });
        }
        self.names = names;
        Ok(self)
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n_cols + j]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        (0..self.n_rows).map(move |i| self.row(i))
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n_rows).map(|i| self.get(i, j)).collect()
    }

    pub fn take(&self, rows: &[usize]) -> FeatureMatrix {
        let mut values = Vec::with_capacity(rows.len() * self.n_cols);
        for &r in rows {
            values.extend_from_slice(self.row(r));
        }
        FeatureMatrix {
            n_rows: rows.len(),
            n_cols: self.n_cols,
            values,
            names: self.names.clone(),
        }
    }

    pub fn push_row(&mut self, row: &[f64]) -> Result<()> {
        if row.len() != self.n_cols {
            return Err(Error::WidthMismatch {
                expected: self.n_cols,
                actual: row.len(),
            });
        }
        self.values.extend_from_slice(row);
        self.n_rows += 1;
        Ok(())
    }

    /// First non-finite cell, if any.
    pub fn check_finite(&self) -> Result<()> {
        match self.values.iter().position(|v| !v.is_finite()) {
            None => Ok(()),
            Some(p) => Err(Error::NonFiniteFeature {
                row: p / self.n_cols.max(1),
                feature: p % self.n_cols.max(1),
            }),
        }
    }
}
