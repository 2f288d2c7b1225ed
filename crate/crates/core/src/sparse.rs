//! Compressed sparse row storage for document-term matrices.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Borrowed view of one sparse row.
#[derive(Debug, Clone, Copy)]
pub struct RowView<'a> {
    pub indices: &'a [u32],
    pub values: &'a [f64],
}

impl<'a> RowView<'a> {
    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + 'a {
        self.indices
            .iter()
            .zip(self.values)
            .map(|(&j, &v)| (j as usize, v))
    }

    /// Merge-join dot product of two rows with sorted indices.
    pub fn dot(&self, other: &RowView<'_>) -> f64 {
        let (mut a, mut b) = (0, 0);
        let mut acc = 0.0;
        while a < self.indices.len() && b < other.indices.len() {
            match self.indices[a].cmp(&other.indices[b]) {
                std::cmp::Ordering::Less => a += 1,
                std::cmp::Ordering::Greater => b += 1,
                std::cmp::Ordering::Equal => {
                    acc += self.values[a] * other.values[b];
                    a += 1;
                    b += 1;
                }
            }
        }
        acc
    }

    pub fn dot_dense(&self, dense: &[f64]) -> f64 {
        self.iter().map(|(j, v)| v * dense[j]).sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }

    pub fn to_owned(&self) -> SparseRow {
        SparseRow {
            indices: self.indices.to_vec(),
            values: self.values.to_vec(),
        }
    }
}

/// Owned sparse row; indices strictly increasing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseRow {
    pub indices: Vec<u32>,
    pub values: Vec<f64>,
}

impl SparseRow {
    pub fn view(&self) -> RowView<'_> {
        RowView {
            indices: &self.indices,
            values: &self.values,
        }
    }

    /// Builds a row from a dense slice, dropping zeros.
    pub fn from_dense(dense: &[f64]) -> Self {
        let mut indices = Vec::new();
        let mut values = Vec::new();
        for (j, &v) in dense.iter().enumerate() {
            if v != 0.0 {
                indices.push(j as u32);
                values.push(v);
            }
        }
        SparseRow { indices, values }
    }
}

/// CSR matrix. Column indices are strictly increasing within each row and
/// explicit zeros are never stored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseMatrix {
    n_cols: usize,
    indptr: Vec<usize>,
    indices: Vec<u32>,
    values: Vec<f64>,
}

impl SparseMatrix {
    pub fn empty(n_cols: usize) -> Self {
        SparseMatrix {
            n_cols,
            indptr: vec![0],
            indices: Vec::new(),
            values: Vec::new(),
        }
    }

    /// Assembles a matrix from owned rows, checking the CSR invariants.
    pub fn from_rows(n_cols: usize, rows: impl IntoIterator<Item = SparseRow>) -> Result<Self> {
        let mut m = SparseMatrix::empty(n_cols);
        for row in rows {
            m.push_row(&row.indices, &row.values)?;
        }
        Ok(m)
    }

    pub fn from_dense(n_cols: usize, dense: &[Vec<f64>]) -> Result<Self> {
        Self::from_rows(n_cols, dense.iter().map(|r| SparseRow::from_dense(r)))
    }

    pub fn push_row(&mut self, indices: &[u32], values: &[f64]) -> Result<()> {
        if indices.len() != values.len() {
            return Err(Error::InvalidInput(format!(
                "row has {} indices but {} values",
                indices.len(),
                values.len()
            )));
        }
        for w in indices.windows(2) {
            if w[0] >= w[1] {
                return Err(Error::InvalidInput(
                    "column indices must be strictly increasing".into(),
                ));
            }
        }
        if let Some(&last) = indices.last() {
            if last as usize >= self.n_cols {
                return Err(Error::DimensionMismatch {
                    expected: self.n_cols,
                    actual: last as usize + 1,
                });
            }
        }
        for (&j, &v) in indices.iter().zip(values) {
            if v != 0.0 {
                self.indices.push(j);
                self.values.push(v);
            }
        }
        self.indptr.push(self.indices.len());
        Ok(())
    }

    pub fn n_rows(&self) -> usize {
        self.indptr.len() - 1
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> RowView<'_> {
        let (start, end) = (self.indptr[i], self.indptr[i + 1]);
        RowView {
            indices: &self.indices[start..end],
            values: &self.values[start..end],
        }
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = RowView<'_>> + '_ {
        (0..self.n_rows()).map(move |i| self.row(i))
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        self.rows()
            .map(|r| {
                let mut d = vec![0.0; self.n_cols];
                for (j, v) in r.iter() {
                    d[j] = v;
                }
                d
            })
            .collect()
    }

    /// Matrix holding the selected rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> SparseMatrix {
        let mut m = SparseMatrix::empty(self.n_cols);
        for &i in rows {
            let r = self.row(i);
            m.indices.extend_from_slice(r.indices);
            m.values.extend_from_slice(r.values);
            m.indptr.push(m.indices.len());
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn explicit_zeros_are_dropped() {
        let m = SparseMatrix::from_rows(
            3,
            [SparseRow {
                indices: vec![0, 2],
                values: vec![0.0, 1.5],
            }],
        )
        .unwrap();
        assert_eq!(m.nnz(), 1);
        assert_eq!(m.row(0).indices, &[2]);
    }

    #[test]
    fn rejects_unsorted_and_out_of_range() {
        let mut m = SparseMatrix::empty(3);
        assert!(m.push_row(&[1, 0], &[1.0, 1.0]).is_err());
        assert!(m.push_row(&[3], &[1.0]).is_err());
        assert_eq!(m.n_rows(), 0);
    }

    #[test]
    fn dot_products_agree() {
        let a = SparseRow::from_dense(&[1.0, 0.0, 2.0, 3.0]);
        let b = SparseRow::from_dense(&[0.0, 5.0, 4.0, -1.0]);
        assert_eq!(a.view().dot(&b.view()), 5.0);
        assert_eq!(a.view().dot_dense(&[0.0, 5.0, 4.0, -1.0]), 5.0);
    }
}
