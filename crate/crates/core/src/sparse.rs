//! Compressed sparse row storage and the kernels the solver stack is built on.
//!
//! All kernels are serial and therefore bitwise deterministic. Entries that
//! cancel to exactly zero during `spmm` or `add` are kept in the pattern, so
//! structural assertions do not depend on floating-point coincidences.

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    n_rows: usize,
    n_cols: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Builds a CSR matrix from raw arrays, checking every structural invariant.
    pub fn try_new(
        n_rows: usize,
        n_cols: usize,
        row_offsets: Vec<usize>,
        col_indices: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if row_offsets.len() != n_rows + 1 {
            return Err(Error::InvalidStructure(format!(
                "row_offsets has length {}, expected {}",
                row_offsets.len(),
                n_rows + 1
            )));
        }
        if row_offsets[0] != 0 {
            return Err(Error::InvalidStructure("row_offsets[0] must be 0".into()));
        }
        if col_indices.len() != values.len() || row_offsets[n_rows] != values.len() {
            return Err(Error::InvalidStructure(
                "row_offsets, col_indices and values disagree on nnz".into(),
            ));
        }
        for i in 0..n_rows {
            let (start, end) = (row_offsets[i], row_offsets[i + 1]);
            if start > end {
                return Err(Error::InvalidStructure(format!(
                    "row_offsets decreases at row {i}"
                )));
            }
            let cols = &col_indices[start..end];
            for (k, &c) in cols.iter().enumerate() {
                if c >= n_cols {
                    return Err(Error::IndexOutOfRange {
                        index: c,
                        bound: n_cols,
                    });
                }
                if k > 0 && cols[k - 1] >= c {
                    return Err(Error::InvalidStructure(format!(
                        "columns in row {i} are not strictly increasing"
                    )));
                }
            }
        }
        if let Some(p) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(p));
        }
        Ok(Self {
            n_rows,
            n_cols,
            row_offsets,
            col_indices,
            values,
        })
    }

    /// Assembles from (row, col, value) triplets. Duplicates are summed in
    /// input order; explicit zeros are kept.
    pub fn from_triplets(
        n_rows: usize,
        n_cols: usize,
        triplets: &[(usize, usize, f64)],
    ) -> Result<Self> {
        let mut counts = vec![0usize; n_rows + 1];
        for &(r, c, v) in triplets {
            if r >= n_rows {
                return Err(Error::IndexOutOfRange {
                    index: r,
                    bound: n_rows,
                });
            }
            if c >= n_cols {
                return Err(Error::IndexOutOfRange {
                    index: c,
                    bound: n_cols,
                });
            }
            if !v.is_finite() {
                return Err(Error::NonFinite(r));
            }
            counts[r + 1] += 1;
        }
        for i in 0..n_rows {
            counts[i + 1] += counts[i];
        }
        // bucket by row, stable so duplicate summation follows input order
        let mut next = counts.clone();
        let mut bucket = vec![(0usize, 0.0f64); triplets.len()];
        for &(r, c, v) in triplets {
            bucket[next[r]] = (c, v);
            next[r] += 1;
        }
        let mut row_offsets = Vec::with_capacity(n_rows + 1);
        let mut col_indices = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        row_offsets.push(0);
        for i in 0..n_rows {
            let row = &mut bucket[counts[i]..counts[i + 1]];
            row.sort_by_key(|&(c, _)| c);
            let mut k = 0;
            while k < row.len() {
                let c = row[k].0;
                let mut sum = 0.0;
                while k < row.len() && row[k].0 == c {
                    sum += row[k].1;
                    k += 1;
                }
                col_indices.push(c);
                values.push(sum);
            }
            row_offsets.push(col_indices.len());
        }
        Ok(Self {
            n_rows,
            n_cols,
            row_offsets,
            col_indices,
            values,
        })
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diagonal(&vec![1.0; n])
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        Self {
            n_rows: n,
            n_cols: n,
            row_offsets: (0..=n).collect(),
            col_indices: (0..n).collect(),
            values: diag.to_vec(),
        }
    }

    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        Self {
            n_rows,
            n_cols,
            row_offsets: vec![0; n_rows + 1],
            col_indices: Vec::new(),
            values: Vec::new(),
        }
    }

    /// Converts a dense matrix, storing only entries that are not exactly zero.
    pub fn from_dense(m: &DenseMatrix) -> Self {
        let mut row_offsets = vec![0];
        let mut col_indices = Vec::new();
        let mut values = Vec::new();
        for i in 0..m.n_rows() {
            for j in 0..m.n_cols() {
                let v = m.get(i, j);
                if v != 0.0 {
                    col_indices.push(j);
                    values.push(v);
                }
            }
            row_offsets.push(col_indices.len());
        }
        Self {
            n_rows: m.n_rows(),
            n_cols: m.n_cols(),
            row_offsets,
            col_indices,
            values,
        }
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut d = DenseMatrix::zeros(self.n_rows, self.n_cols);
        for i in 0..self.n_rows {
            for (j, v) in self.row(i) {
                d.set(i, j, v);
            }
        }
        d
    }

    #[inline]
    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    #[inline]
    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    #[inline]
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Iterates over `(col, value)` of row `i`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_offsets[i]..self.row_offsets[i + 1];
        self.col_indices[range.clone()]
            .iter()
            .copied()
            .zip(self.values[range].iter().copied())
    }

    pub fn row_cols(&self, i: usize) -> &[usize] {
        &self.col_indices[self.row_offsets[i]..self.row_offsets[i + 1]]
    }

    /// Stored value at `(i, j)`, zero when not in the pattern.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let cols = self.row_cols(i);
        match cols.binary_search(&j) {
            Ok(k) => self.values[self.row_offsets[i] + k],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n_rows.min(self.n_cols))
            .map(|i| self.get(i, i))
            .collect()
    }

    /// Flops of one SpMV, counting a multiply-add as two.
    #[inline]
    pub fn spmv_flops(&self) -> u64 {
        2 * self.nnz() as u64
    }

    pub fn spmv(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n_cols {
            return Err(Error::DimensionMismatch {
                op: "spmv",
                expected: self.n_cols,
                got: x.len(),
            });
        }
        let mut y = vec![0.0; self.n_rows];
        self.spmv_acc(x, &mut y);
        Ok(y)
    }

    /// `y += self * x`. Lengths are the caller's responsibility.
    pub fn spmv_acc(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n_cols);
        debug_assert_eq!(y.len(), self.n_rows);
        for (i, yi) in y.iter_mut().enumerate() {
            let mut s = 0.0;
            for k in self.row_offsets[i]..self.row_offsets[i + 1] {
                s += self.values[k] * x[self.col_indices[k]];
            }
            *yi += s;
        }
    }

    pub fn transpose(&self) -> SparseMatrix {
        let mut counts = vec![0usize; self.n_cols + 1];
        for &c in &self.col_indices {
            counts[c + 1] += 1;
        }
        for j in 0..self.n_cols {
            counts[j + 1] += counts[j];
        }
        let mut next = counts.clone();
        let mut col_indices = vec![0; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        for i in 0..self.n_rows {
            for k in self.row_offsets[i]..self.row_offsets[i + 1] {
                let c = self.col_indices[k];
                let dst = next[c];
                col_indices[dst] = i;
                values[dst] = self.values[k];
                next[c] += 1;
            }
        }
        SparseMatrix {
            n_rows: self.n_cols,
            n_cols: self.n_rows,
            row_offsets: counts,
            col_indices,
            values,
        }
    }

    /// Sparse product with a symbolic pass fixing the pattern and a numeric
    /// pass filling values. Cancelled entries stay in the pattern.
    pub fn spmm(&self, b: &SparseMatrix) -> Result<SparseMatrix> {
        if self.n_cols != b.n_rows {
            return Err(Error::DimensionMismatch {
                op: "spmm",
                expected: self.n_cols,
                got: b.n_rows,
            });
        }
        let n = b.n_cols;
        let mut marker = vec![usize::MAX; n];

        // symbolic
        let mut row_offsets = Vec::with_capacity(self.n_rows + 1);
        row_offsets.push(0);
        let mut col_indices = Vec::new();
        for i in 0..self.n_rows {
            let start = col_indices.len();
            for &k in self.row_cols(i) {
                for &j in b.row_cols(k) {
                    if marker[j] != i {
                        marker[j] = i;
                        col_indices.push(j);
                    }
                }
            }
            col_indices[start..].sort_unstable();
            row_offsets.push(col_indices.len());
        }

        // numeric
        let mut values = vec![0.0; col_indices.len()];
        let mut acc = vec![0.0; n];
        for i in 0..self.n_rows {
            for (k, a_ik) in self.row(i) {
                for (j, b_kj) in b.row(k) {
                    acc[j] += a_ik * b_kj;
                }
            }
            for p in row_offsets[i]..row_offsets[i + 1] {
                let j = col_indices[p];
                values[p] = acc[j];
                acc[j] = 0.0;
            }
        }
        Ok(SparseMatrix {
            n_rows: self.n_rows,
            n_cols: n,
            row_offsets,
            col_indices,
            values,
        })
    }

    /// `self + other` on the union of both patterns.
    pub fn add(&self, other: &SparseMatrix) -> Result<SparseMatrix> {
        if self.n_rows != other.n_rows || self.n_cols != other.n_cols {
            return Err(Error::DimensionMismatch {
                op: "add",
                expected: self.n_rows * self.n_cols,
                got: other.n_rows * other.n_cols,
            });
        }
        let mut row_offsets = vec![0];
        let mut col_indices = Vec::with_capacity(self.nnz() + other.nnz());
        let mut values = Vec::with_capacity(self.nnz() + other.nnz());
        for i in 0..self.n_rows {
            let (mut p, pe) = (self.row_offsets[i], self.row_offsets[i + 1]);
            let (mut q, qe) = (other.row_offsets[i], other.row_offsets[i + 1]);
            while p < pe || q < qe {
                let cp = if p < pe { self.col_indices[p] } else { usize::MAX };
                let cq = if q < qe { other.col_indices[q] } else { usize::MAX };
                if cp == cq {
                    col_indices.push(cp);
                    values.push(self.values[p] + other.values[q]);
                    p += 1;
                    q += 1;
                } else if cp < cq {
                    col_indices.push(cp);
                    values.push(self.values[p]);
                    p += 1;
                } else {
                    col_indices.push(cq);
                    values.push(other.values[q]);
                    q += 1;
                }
            }
            row_offsets.push(col_indices.len());
        }
        Ok(SparseMatrix {
            n_rows: self.n_rows,
            n_cols: self.n_cols,
            row_offsets,
            col_indices,
            values,
        })
    }

    pub fn scale(&self, s: f64) -> SparseMatrix {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= s);
        out
    }

    /// Multiplies column `j` by `factors[j]`.
    pub fn scale_columns(&self, factors: &[f64]) -> Result<SparseMatrix> {
        if factors.len() != self.n_cols {
            return Err(Error::DimensionMismatch {
                op: "scale_columns",
                expected: self.n_cols,
                got: factors.len(),
            });
        }
        let mut out = self.clone();
        for (v, &c) in out.values.iter_mut().zip(&self.col_indices) {
            *v *= factors[c];
        }
        Ok(out)
    }

    /// Multiplies row `i` by `factors[i]`.
    pub fn scale_rows(&self, factors: &[f64]) -> Result<SparseMatrix> {
        if factors.len() != self.n_rows {
            return Err(Error::DimensionMismatch {
                op: "scale_rows",
                expected: self.n_rows,
                got: factors.len(),
            });
        }
        let mut out = self.clone();
        for i in 0..self.n_rows {
            for k in self.row_offsets[i]..self.row_offsets[i + 1] {
                out.values[k] *= factors[i];
            }
        }
        Ok(out)
    }

    /// Dense `|idx| x |idx|` block `a[idx[p], idx[q]]`.
    pub fn gather_submatrix(&self, idx: &[usize]) -> Result<DenseMatrix> {
        for (p, &i) in idx.iter().enumerate() {
            if i >= self.n_rows || i >= self.n_cols {
                return Err(Error::IndexOutOfRange {
                    index: i,
                    bound: self.n_rows.min(self.n_cols),
                });
            }
            if p > 0 && idx[p - 1] >= i {
                return Err(Error::InvalidParameter(
                    "gather indices must be strictly increasing".into(),
                ));
            }
        }
        let m = idx.len();
        let mut out = DenseMatrix::zeros(m, m);
        for (p, &i) in idx.iter().enumerate() {
            let cols = self.row_cols(i);
            let vals = &self.values[self.row_offsets[i]..self.row_offsets[i + 1]];
            // merge two sorted lists
            let (mut a, mut b) = (0, 0);
            while a < cols.len() && b < m {
                match cols[a].cmp(&idx[b]) {
                    std::cmp::Ordering::Less => a += 1,
                    std::cmp::Ordering::Greater => b += 1,
                    std::cmp::Ordering::Equal => {
                        out.set(p, b, vals[a]);
                        a += 1;
                        b += 1;
                    }
                }
            }
        }
        Ok(out)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// True when stored values satisfy `a[i,j] == a[j,i]` bitwise.
    pub fn is_symmetric(&self) -> bool {
        self.n_rows == self.n_cols && self.symmetry_defect() == 0.0
    }

    /// `max |a[i,j] - a[j,i]|` over both patterns.
    pub fn symmetry_defect(&self) -> f64 {
        if self.n_rows != self.n_cols {
            return f64::INFINITY;
        }
        let t = self.transpose();
        let mut defect = 0.0f64;
        for i in 0..self.n_rows {
            for (j, v) in self.row(i) {
                defect = defect.max((v - t.get(i, j)).abs());
            }
            for (j, v) in t.row(i) {
                defect = defect.max((v - self.get(i, j)).abs());
            }
        }
        defect
    }

    /// Same dimensions and same stored (row, col) pairs.
    pub fn same_pattern(&self, other: &SparseMatrix) -> bool {
        self.n_rows == other.n_rows
            && self.n_cols == other.n_cols
            && self.row_offsets == other.row_offsets
            && self.col_indices == other.col_indices
    }

    /// Row positions of the stored entries in each column.
    pub fn column_patterns(&self) -> Vec<Vec<usize>> {
        let t = self.transpose();
        (0..self.n_cols).map(|j| t.row_cols(j).to_vec()).collect()
    }
}
