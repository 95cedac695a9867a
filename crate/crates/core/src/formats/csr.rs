use serde::{Deserialize, Serialize};

use super::DenseMatrix;
use crate::error::{Error, Result};

/// Compressed sparse row matrix with 32-bit float values.
///
/// Column indices are strictly increasing within a row. Construction through
/// [`CsrMatrix::new`] checks every structural invariant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsrMatrix {
    n_rows: usize,
    n_cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<u32>,
    values: Vec<f32>,
}

impl CsrMatrix {
    pub fn new(
        n_rows: usize,
        n_cols: usize,
        row_ptr: Vec<usize>,
        col_idx: Vec<u32>,
        values: Vec<f32>,
    ) -> Result<Self> {
        if row_ptr.len() != n_rows + 1 {
            return Err(Error::InvalidMatrix(format!(
                "row_ptr has {} entries, expected {}",
                row_ptr.len(),
                n_rows + 1
            )));
        }
        if row_ptr[0] != 0 {
            return Err(Error::InvalidMatrix("row_ptr[0] != 0".into()));
        }
        if col_idx.len() != values.len() || row_ptr[n_rows] != col_idx.len() {
            return Err(Error::InvalidMatrix(format!(
                "row_ptr[n] = {}, {} column indices, {} values",
                row_ptr[n_rows],
                col_idx.len(),
                values.len()
            )));
        }
        if n_cols > u32::MAX as usize {
            return Err(Error::InvalidMatrix("more than 2^32 columns".into()));
        }
        for r in 0..n_rows {
            let (lo, hi) = (row_ptr[r], row_ptr[r + 1]);
            if lo > hi {
                return Err(Error::InvalidMatrix(format!("row_ptr decreases at row {r}")));
            }
            let cols = &col_idx[lo..hi];
            if cols.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidMatrix(format!(
                    "row {r}: column indices not strictly increasing"
                )));
            }
            if let Some(&c) = cols.last() {
                if c as usize >= n_cols {
                    return Err(Error::InvalidMatrix(format!(
                        "row {r}: column {c} out of range for {n_cols} columns"
                    )));
                }
            }
        }
        Ok(Self {
            n_rows,
            n_cols,
            row_ptr,
            col_idx,
            values,
        })
    }

    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        Self {
            n_rows,
            n_cols,
            row_ptr: vec![0; n_rows + 1],
            col_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            n_rows: n,
            n_cols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n as u32).collect(),
            values: vec![1.0; n],
        }
    }

    /// Builds from per-row (column, value) lists that are already sorted by column.
    pub fn from_sorted_rows(n_cols: usize, rows: Vec<Vec<(u32, f32)>>) -> Result<Self> {
        let n_rows = rows.len();
        let nnz = rows.iter().map(Vec::len).sum();
        let mut row_ptr = Vec::with_capacity(n_rows + 1);
        let mut col_idx = Vec::with_capacity(nnz);
        let mut values = Vec::with_capacity(nnz);
        row_ptr.push(0);
        for row in rows {
            for (c, v) in row {
                col_idx.push(c);
                values.push(v);
            }
            row_ptr.push(col_idx.len());
        }
        Self::new(n_rows, n_cols, row_ptr, col_idx, values)
    }

    /// Builds from unordered triplets; duplicate coordinates are summed.
    pub fn from_triplets(
        n_rows: usize,
        n_cols: usize,
        triplets: &[(usize, usize, f32)],
    ) -> Result<Self> {
        let mut rows: Vec<Vec<(u32, f32)>> = vec![Vec::new(); n_rows];
        for &(r, c, v) in triplets {
            if r >= n_rows || c >= n_cols {
                return Err(Error::InvalidMatrix(format!(
                    "triplet ({r}, {c}) outside {n_rows}x{n_cols}"
                )));
            }
            rows[r].push((c as u32, v));
        }
        for row in &mut rows {
            row.sort_by_key(|e| e.0);
            row.dedup_by(|b, a| {
                if a.0 == b.0 {
                    a.1 += b.1;
                    true
                } else {
                    false
                }
            });
        }
        Self::from_sorted_rows(n_cols, rows)
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[u32] {
        &self.col_idx
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn is_square(&self) -> bool {
        self.n_rows == self.n_cols
    }

    pub fn density(&self) -> f64 {
        if self.n_rows == 0 || self.n_cols == 0 {
            return 0.0;
        }
        self.nnz() as f64 / (self.n_rows as f64 * self.n_cols as f64)
    }

    /// Column indices and values of row `i`.
    pub fn row(&self, i: usize) -> (&[u32], &[f32]) {
        let (lo, hi) = (self.row_ptr[i], self.row_ptr[i + 1]);
        (&self.col_idx[lo..hi], &self.values[lo..hi])
    }

    pub fn row_nnz(&self, i: usize) -> usize {
        self.row_ptr[i + 1] - self.row_ptr[i]
    }

    /// Iterates `(row, col, value)` in row-major order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f32)> + '_ {
        (0..self.n_rows).flat_map(move |r| {
            let (cols, vals) = self.row(r);
            cols.iter()
                .zip(vals)
                .map(move |(&c, &v)| (r, c as usize, v))
        })
    }

    /// Value at `(i, j)` or 0.
    pub fn get(&self, i: usize, j: usize) -> f32 {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&(j as u32)) {
            Ok(k) => vals[k],
            Err(_) => 0.0,
        }
    }

    /// Columns `start..end` with indices shifted to start at zero.
    pub fn column_panel(&self, start: usize, end: usize) -> CsrMatrix {
        let end = end.min(self.n_cols);
        let start = start.min(end);
        let mut row_ptr = Vec::with_capacity(self.n_rows + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for r in 0..self.n_rows {
            let (cols, vals) = self.row(r);
            let lo = cols.partition_point(|&c| (c as usize) < start);
            let hi = cols.partition_point(|&c| (c as usize) < end);
            col_idx.extend(cols[lo..hi].iter().map(|&c| c - start as u32));
            values.extend_from_slice(&vals[lo..hi]);
            row_ptr.push(col_idx.len());
        }
        CsrMatrix {
            n_rows: self.n_rows,
            n_cols: end - start,
            row_ptr,
            col_idx,
            values,
        }
    }

    /// Same pattern with every stored value replaced by `v`.
    pub fn with_uniform_values(&self, v: f32) -> CsrMatrix {
        CsrMatrix {
            values: vec![v; self.nnz()],
            ..self.clone()
        }
    }

    /// Same pattern, new values (one per stored entry).
    pub fn with_values(&self, values: Vec<f32>) -> Result<CsrMatrix> {
        if values.len() != self.nnz() {
            return Err(Error::DimensionMismatch(format!(
                "{} values for {} stored entries",
                values.len(),
                self.nnz()
            )));
        }
        Ok(CsrMatrix {
            values,
            ..self.clone()
        })
    }

    pub fn same_pattern(&self, other: &CsrMatrix) -> bool {
        self.n_rows == other.n_rows
            && self.n_cols == other.n_cols
            && self.row_ptr == other.row_ptr
            && self.col_idx == other.col_idx
    }
}

/// Entries with `|value| > eps` become stored nonzeros.
pub fn csr_from_dense(m: &DenseMatrix, eps: f32) -> CsrMatrix {
    let eps = eps.max(0.0);
    let mut row_ptr = Vec::with_capacity(m.n_rows() + 1);
    let mut col_idx = Vec::new();
    let mut values = Vec::new();
    row_ptr.push(0);
    for i in 0..m.n_rows() {
        for (j, &v) in m.row(i).iter().enumerate() {
            if v.abs() > eps {
                col_idx.push(j as u32);
                values.push(v);
            }
        }
        row_ptr.push(col_idx.len());
    }
    CsrMatrix {
        n_rows: m.n_rows(),
        n_cols: m.n_cols(),
        row_ptr,
        col_idx,
        values,
    }
}

pub fn dense_from_csr(a: &CsrMatrix) -> DenseMatrix {
    let mut m = DenseMatrix::zeros(a.n_rows(), a.n_cols());
    for (i, j, v) in a.iter() {
        m.set(i, j, v);
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_matrix_has_empty_structure() {
        let a = csr_from_dense(&DenseMatrix::zeros(4, 4), 0.0);
        assert_eq!(a.row_ptr(), &[0, 0, 0, 0, 0]);
        assert!(a.col_idx().is_empty());
        assert!(a.values().is_empty());
    }

    #[test]
    fn identity_structure() {
        let a = csr_from_dense(&DenseMatrix::identity(3), 0.0);
        assert_eq!(a.row_ptr(), &[0, 1, 2, 3]);
        assert_eq!(a.col_idx(), &[0, 1, 2]);
        assert_eq!(a.values(), &[1.0, 1.0, 1.0]);
        assert_eq!(a, CsrMatrix::identity(3));
    }

    #[test]
    fn eps_threshold_is_strict() {
        let m = DenseMatrix::from_vec(1, 3, vec![0.5, -0.5, 0.25]).unwrap();
        let a = csr_from_dense(&m, 0.25);
        assert_eq!(a.col_idx(), &[0, 1]);
    }

    #[test]
    fn rejects_unsorted_and_out_of_range() {
        assert!(CsrMatrix::new(1, 4, vec![0, 2], vec![2, 1], vec![1.0, 1.0]).is_err());
        assert!(CsrMatrix::new(1, 4, vec![0, 1], vec![4], vec![1.0]).is_err());
        assert!(CsrMatrix::new(1, 4, vec![1, 1], vec![0], vec![1.0]).is_err());
        assert!(CsrMatrix::new(2, 4, vec![0, 2, 1], vec![0, 1], vec![1.0, 1.0]).is_err());
    }

    #[test]
    fn column_panel_shifts_indices() {
        let a = CsrMatrix::from_triplets(2, 6, &[(0, 1, 1.0), (0, 4, 2.0), (1, 5, 3.0)]).unwrap();
        let p = a.column_panel(3, 6);
        assert_eq!(p.n_cols(), 3);
        assert_eq!(p.row_ptr(), &[0, 1, 2]);
        assert_eq!(p.col_idx(), &[1, 2]);
        assert_eq!(p.values(), &[2.0, 3.0]);
    }

    #[test]
    fn triplets_sum_duplicates() {
        let a = CsrMatrix::from_triplets(1, 3, &[(0, 2, 1.0), (0, 0, 1.0), (0, 2, 2.0)]).unwrap();
        assert_eq!(a.col_idx(), &[0, 2]);
        assert_eq!(a.values(), &[1.0, 3.0]);
    }
}
