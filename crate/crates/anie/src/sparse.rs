//! Minimal CSR matrix with the dense products needed by the truncated SVD.

use nalgebra::DMatrix;

/// Compressed sparse row matrix over f64.
#[derive(Debug, Clone)]
pub struct SparseMatrix {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    col_indices: Vec<u32>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Builds from triples sorted by `(row, col)` with no duplicates.
    pub fn from_sorted_triples(
        nrows: usize,
        ncols: usize,
        triples: impl IntoIterator<Item = (u32, u32, f64)>,
    ) -> Self {
        let mut indptr = vec![0usize; nrows + 1];
        let mut col_indices = Vec::new();
        let mut values = Vec::new();
        let mut last: Option<(u32, u32)> = None;
        for (r, c, v) in triples {
            debug_assert!((r as usize) < nrows && (c as usize) < ncols);
            debug_assert!(last.map(|p| p < (r, c)).unwrap_or(true), "unsorted triples");
            last = Some((r, c));
            indptr[r as usize + 1] += 1;
            col_indices.push(c);
            values.push(v);
        }
        for i in 0..nrows {
            indptr[i + 1] += indptr[i];
        }
        Self {
            nrows,
            ncols,
            indptr,
            col_indices,
            values,
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        let lo = self.indptr[row];
        let hi = self.indptr[row + 1];
        match self.col_indices[lo..hi].binary_search(&(col as u32)) {
            Ok(i) => self.values[lo + i],
            Err(_) => 0.0,
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// `self * m` for a dense `ncols x k` matrix.
    pub fn mul_dense(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        assert_eq!(m.nrows(), self.ncols);
        let k = m.ncols();
        let mut out = DMatrix::<f64>::zeros(self.nrows, k);
        for c in 0..k {
            let col = m.column(c);
            for row in 0..self.nrows {
                let mut acc = 0.0;
                for idx in self.indptr[row]..self.indptr[row + 1] {
                    acc += self.values[idx] * col[self.col_indices[idx] as usize];
                }
                out[(row, c)] = acc;
            }
        }
        out
    }

    /// `self^T * m` for a dense `nrows x k` matrix.
    pub fn mul_transpose_dense(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        assert_eq!(m.nrows(), self.nrows);
        let k = m.ncols();
        let mut out = DMatrix::<f64>::zeros(self.ncols, k);
        for c in 0..k {
            for row in 0..self.nrows {
                let x = m[(row, c)];
                if x == 0.0 {
                    continue;
                }
                for idx in self.indptr[row]..self.indptr[row + 1] {
                    out[(self.col_indices[idx] as usize, c)] += self.values[idx] * x;
                }
            }
        }
        out
    }
}
