//! Signed sparse matrices in canonical compressed-row form.
//!
//! Matrices are assembled through [`CooBuilder`] and finalized into CSR with
//! row-major, column-ascending ordering. Duplicate coordinates are summed and
//! exact zeros are dropped at finalization, so two matrices holding the same
//! values compare equal structurally.
//!
//! Boundary, projection and assignment matrices only carry values in
//! `{-1, 0, +1}`, which keeps every product below exact in `f64`.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::io::fmt_f64;

pub type DenseMatrix = DMatrix<f64>;

// Below this many output cells spmm stays on the calling thread.
const PAR_THRESHOLD: usize = 1 << 14;

/// Coordinate-list accumulator for a [`SparseMatrix`].
#[derive(Debug, Clone)]
pub struct CooBuilder {
    rows: usize,
    cols: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl CooBuilder {
    pub fn new(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            entries: Vec::new(),
        }
    }

    pub fn with_capacity(rows: usize, cols: usize, cap: usize) -> Self {
        Self {
            rows,
            cols,
            entries: Vec::with_capacity(cap),
        }
    }

    pub fn push(&mut self, row: usize, col: usize, value: f64) -> Result<()> {
        if row >= self.rows || col >= self.cols {
            return Err(Error::IndexOutOfRange {
                row,
                col,
                rows: self.rows,
                cols: self.cols,
            });
        }
        self.entries.push((row, col, value));
        Ok(())
    }

    pub fn finalize(mut self) -> SparseMatrix {
        self.entries.sort_by_key(|e| (e.0, e.1));
        let mut indptr = vec![0usize; self.rows + 1];
        let mut indices = Vec::with_capacity(self.entries.len());
        let mut values = Vec::with_capacity(self.entries.len());

        let mut i = 0;
        while i < self.entries.len() {
            let (r, c, mut v) = self.entries[i];
            i += 1;
            while i < self.entries.len() && self.entries[i].0 == r && self.entries[i].1 == c {
                v += self.entries[i].2;
                i += 1;
            }
            if v != 0.0 {
                indices.push(c);
                values.push(v);
                indptr[r + 1] += 1;
            }
        }
        for r in 0..self.rows {
            indptr[r + 1] += indptr[r];
        }
        SparseMatrix {
            rows: self.rows,
            cols: self.cols,
            indptr,
            indices,
            values,
        }
    }
}

/// Real sparse matrix in canonical CSR form.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    rows: usize,
    cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            indptr: vec![0; rows + 1],
            indices: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            rows: n,
            cols: n,
            indptr: (0..=n).collect(),
            indices: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn from_triplets<I>(rows: usize, cols: usize, triplets: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        let mut b = CooBuilder::new(rows, cols);
        for (r, c, v) in triplets {
            b.push(r, c, v)?;
        }
        Ok(b.finalize())
    }

    pub fn from_dense(m: &DenseMatrix) -> Self {
        let mut b = CooBuilder::new(m.nrows(), m.ncols());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                let v = m[(i, j)];
                if v != 0.0 {
                    b.entries.push((i, j, v));
                }
            }
        }
        b.finalize()
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut m = DenseMatrix::zeros(self.rows, self.cols);
        for (i, j, v) in self.triplets() {
            m[(i, j)] = v;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn is_zero(&self) -> bool {
        self.values.is_empty()
    }

    /// Stored `(column, value)` pairs of one row, columns ascending.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.indptr[i]..self.indptr[i + 1];
        self.indices[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    /// All stored entries in row-major order.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.rows).flat_map(move |i| self.row(i).map(move |(j, v)| (i, j, v)))
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let span = self.indptr[i]..self.indptr[i + 1];
        match self.indices[span.clone()].binary_search(&j) {
            Ok(pos) => self.values[span.start + pos],
            Err(_) => 0.0,
        }
    }

    pub fn transpose(&self) -> Self {
        let mut counts = vec![0usize; self.cols + 1];
        for &j in &self.indices {
            counts[j + 1] += 1;
        }
        for j in 0..self.cols {
            counts[j + 1] += counts[j];
        }
        let indptr = counts.clone();
        let mut next = counts;
        let mut indices = vec![0usize; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        // Rows are visited in ascending order, so each transposed row comes out sorted.
        for (i, j, v) in self.triplets() {
            let slot = next[j];
            indices[slot] = i;
            values[slot] = v;
            next[j] += 1;
        }
        Self {
            rows: self.cols,
            cols: self.rows,
            indptr,
            indices,
            values,
        }
    }

    /// Entrywise absolute value; the sparsity pattern is unchanged.
    pub fn abs_entries(&self) -> Self {
        Self {
            values: self.values.iter().map(|v| v.abs()).collect(),
            ..self.clone()
        }
    }

    pub fn scale(&self, factor: f64) -> Self {
        if factor == 0.0 {
            return Self::zeros(self.rows, self.cols);
        }
        Self {
            values: self.values.iter().map(|v| v * factor).collect(),
            ..self.clone()
        }
    }

    /// Sum of two matrices of equal shape; cancelled entries are dropped.
    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.shape() != other.shape() {
            return Err(Error::DimensionMismatch {
                op: "add",
                left: self.shape(),
                right: other.shape(),
            });
        }
        let mut b = CooBuilder::with_capacity(self.rows, self.cols, self.nnz() + other.nnz());
        b.entries.extend(self.triplets());
        b.entries.extend(other.triplets());
        Ok(b.finalize())
    }

    /// Sparse-sparse product (row-wise Gustavson). Exact-zero results from
    /// cancellation are not stored.
    pub fn spgemm(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch {
                op: "spgemm",
                left: self.shape(),
                right: other.shape(),
            });
        }
        let mut indptr = Vec::with_capacity(self.rows + 1);
        indptr.push(0);
        let mut indices = Vec::new();
        let mut values = Vec::new();

        let mut acc = vec![0.0; other.cols];
        let mut seen = vec![false; other.cols];
        let mut touched: Vec<usize> = Vec::new();
        for i in 0..self.rows {
            for (k, a) in self.row(i) {
                for (j, b) in other.row(k) {
                    if !seen[j] {
                        seen[j] = true;
                        touched.push(j);
                    }
                    acc[j] += a * b;
                }
            }
            touched.sort_unstable();
            for &j in &touched {
                if acc[j] != 0.0 {
                    indices.push(j);
                    values.push(acc[j]);
                }
                acc[j] = 0.0;
                seen[j] = false;
            }
            touched.clear();
            indptr.push(indices.len());
        }
        Ok(Self {
            rows: self.rows,
            cols: other.cols,
            indptr,
            indices,
            values,
        })
    }

    /// Sparse times dense. Each output entry is accumulated in stored-column
    /// order, independent of how rows are scheduled across threads.
    pub fn spmm(&self, b: &DenseMatrix) -> Result<DenseMatrix> {
        if self.cols != b.nrows() {
            return Err(Error::DimensionMismatch {
                op: "spmm",
                left: self.shape(),
                right: b.shape(),
            });
        }
        let width = b.ncols();
        let row_product = |i: usize| -> Vec<f64> {
            let mut acc = vec![0.0; width];
            for (k, a) in self.row(i) {
                for (c, slot) in acc.iter_mut().enumerate() {
                    *slot += a * b[(k, c)];
                }
            }
            acc
        };
        let rows: Vec<Vec<f64>> = if self.rows * width >= PAR_THRESHOLD {
            (0..self.rows).into_par_iter().map(row_product).collect()
        } else {
            (0..self.rows).map(row_product).collect()
        };
        Ok(DenseMatrix::from_fn(self.rows, width, |i, c| rows[i][c]))
    }

    /// Number of stored entries in every column.
    pub fn col_nnz(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.cols];
        for &j in &self.indices {
            counts[j] += 1;
        }
        counts
    }

    /// COO text export: `rows cols nnz` header, then `row col value` lines.
    pub fn to_coo_text(&self) -> String {
        let mut out = format!("{} {} {}\n", self.rows, self.cols, self.nnz());
        for (i, j, v) in self.triplets() {
            out.push_str(&format!("{i} {j} {}\n", fmt_f64(v)));
        }
        out
    }

    pub fn from_coo_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty COO file".into()))?;
        let head: Vec<usize> = header
            .split_whitespace()
            .map(|t| t.parse::<usize>())
            .collect::<Result<_, _>>()
            .map_err(|e| Error::Parse(format!("COO header: {e}")))?;
        let [rows, cols, nnz] = head[..] else {
            return Err(Error::Parse(format!(
                "COO header needs 3 fields: {header:?}"
            )));
        };
        let mut b = CooBuilder::with_capacity(rows, cols, nnz);
        let mut count = 0;
        for (lineno, line) in lines.enumerate() {
            let parts: Vec<&str> = line.split_whitespace().collect();
            let bad = || Error::Parse(format!("COO line {}: {line:?}", lineno + 2));
            if parts.len() != 3 {
                return Err(bad());
            }
            let r = parts[0].parse().map_err(|_| bad())?;
            let c = parts[1].parse().map_err(|_| bad())?;
            let v = parts[2].parse().map_err(|_| bad())?;
            b.push(r, c, v)?;
            count += 1;
        }
        if count != nnz {
            return Err(Error::Parse(format!(
                "COO header declares {nnz} entries, found {count}"
            )));
        }
        Ok(b.finalize())
    }
}
