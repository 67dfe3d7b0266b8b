//! Small dense matrices for desk-scale oracles and spectral work.
//!
//! Symmetric eigen, SVD and LU delegate to `nalgebra`, general eigenvalues to
//! `faer`. Every routine that is cubic in the dimension checks the size cap
//! first.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub const DEFAULT_DENSE_CAP: usize = 2000;

/// Dense size cap, overridable through `RACP_DENSE_CAP`.
pub fn dense_cap() -> usize {
    std::env::var("RACP_DENSE_CAP")
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(DEFAULT_DENSE_CAP)
}

fn check_cap(n: usize, cap: usize) -> Result<()> {
    if n > cap {
        Err(Error::SizeCapExceeded { size: n, cap })
    } else {
        Ok(())
    }
}

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    n_rows: usize,
    n_cols: usize,
    values: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        Self {
            n_rows,
            n_cols,
            values: vec![0.0; n_rows * n_cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn from_row_major(n_rows: usize, n_cols: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n_rows * n_cols {
            return Err(Error::DimensionMismatch {
                op: "DenseMatrix::from_row_major",
                expected: n_rows * n_cols,
                got: values.len(),
            });
        }
        Ok(Self {
            n_rows,
            n_cols,
            values,
        })
    }

    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, |r| r.len());
        let mut values = Vec::with_capacity(n_rows * n_cols);
        for r in rows {
            if r.len() != n_cols {
                return Err(Error::DimensionMismatch {
                    op: "DenseMatrix::from_rows",
                    expected: n_cols,
                    got: r.len(),
                });
            }
            values.extend_from_slice(r);
        }
        Ok(Self {
            n_rows,
            n_cols,
            values,
        })
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        let mut m = Self::zeros(d.len(), d.len());
        for (i, &v) in d.iter().enumerate() {
            m.set(i, i, v);
        }
        m
    }

    #[inline]
    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    #[inline]
    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n_cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.values[i * self.n_cols + j] = v;
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n_rows).map(|i| self.get(i, j)).collect()
    }

    pub fn set_column(&mut self, j: usize, col: &[f64]) {
        for (i, &v) in col.iter().enumerate() {
            self.set(i, j, v);
        }
    }

    pub fn transpose(&self) -> DenseMatrix {
        let mut t = DenseMatrix::zeros(self.n_cols, self.n_rows);
        for i in 0..self.n_rows {
            for j in 0..self.n_cols {
                t.set(j, i, self.get(i, j));
            }
        }
        t
    }

    pub fn matmul(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.n_cols != other.n_rows {
            return Err(Error::DimensionMismatch {
                op: "matmul",
                expected: self.n_cols,
                got: other.n_rows,
            });
        }
        let mut out = DenseMatrix::zeros(self.n_rows, other.n_cols);
        for i in 0..self.n_rows {
            for k in 0..self.n_cols {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.n_cols {
                    out.values[i * other.n_cols + j] += a * other.get(k, j);
                }
            }
        }
        Ok(out)
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n_rows)
            .map(|i| (0..self.n_cols).map(|j| self.get(i, j) * x[j]).sum())
            .collect()
    }

    pub fn add(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!((self.n_rows, self.n_cols), (other.n_rows, other.n_cols));
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a + b)
            .collect();
        DenseMatrix {
            n_rows: self.n_rows,
            n_cols: self.n_cols,
            values,
        }
    }

    pub fn scale(&self, s: f64) -> DenseMatrix {
        DenseMatrix {
            n_rows: self.n_rows,
            n_cols: self.n_cols,
            values: self.values.iter().map(|v| v * s).collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Places `block` with its top-left corner at `(r0, c0)`.
    pub fn set_block(&mut self, r0: usize, c0: usize, block: &DenseMatrix) {
        for i in 0..block.n_rows {
            for j in 0..block.n_cols {
                self.set(r0 + i, c0 + j, block.get(i, j));
            }
        }
    }

    pub fn to_nalgebra(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.n_rows, self.n_cols, &self.values)
    }

    pub fn from_nalgebra(m: &DMatrix<f64>) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(m.nrows(), m.ncols());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                out.set(i, j, m[(i, j)]);
            }
        }
        out
    }

    /// Singular values in descending order.
    pub fn singular_values(&self) -> Result<Vec<f64>> {
        check_cap(self.n_rows.max(self.n_cols), dense_cap())?;
        if self.n_rows == 0 || self.n_cols == 0 {
            return Ok(Vec::new());
        }
        let svd = nalgebra::SVD::try_new(self.to_nalgebra(), false, false, f64::EPSILON, 10_000)
            .ok_or_else(|| Error::NoConvergence("SVD".into()))?;
        let mut s: Vec<f64> = svd.singular_values.iter().copied().collect();
        s.sort_by(|a, b| b.total_cmp(a));
        Ok(s)
    }

    /// Numerical rank with the usual `max(m,n)·eps·σ_max` threshold.
    pub fn rank(&self) -> Result<usize> {
        let s = self.singular_values()?;
        let Some(&smax) = s.first() else {
            return Ok(0);
        };
        let tol = self.n_rows.max(self.n_cols) as f64 * f64::EPSILON * smax;
        Ok(s.iter().filter(|&&v| v > tol).count())
    }

    /// Eigenvalues (ascending) and column eigenvectors of a symmetric matrix.
    pub fn symmetric_eigen(&self) -> Result<(Vec<f64>, DenseMatrix)> {
        self.require_square("symmetric_eigen")?;
        check_cap(self.n_rows, dense_cap())?;
        let eig = nalgebra::SymmetricEigen::try_new(self.to_nalgebra(), f64::EPSILON, 10_000)
            .ok_or_else(|| Error::NoConvergence("symmetric eigensolver".into()))?;
        let n = self.n_rows;
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
        let mut vectors = DenseMatrix::zeros(n, n);
        for (dst, &k) in order.iter().enumerate() {
            for i in 0..n {
                vectors.set(i, dst, eig.eigenvectors[(i, k)]);
            }
        }
        Ok((values, vectors))
    }

    /// Solves `self * X = rhs` by LU with partial pivoting.
    pub fn solve(&self, rhs: &DenseMatrix) -> Result<DenseMatrix> {
        self.require_square("solve")?;
        check_cap(self.n_rows, dense_cap())?;
        let lu = self.to_nalgebra().lu();
        let x = lu
            .solve(&rhs.to_nalgebra())
            .ok_or_else(|| Error::RankDeficient("singular matrix in dense solve".into()))?;
        Ok(DenseMatrix::from_nalgebra(&x))
    }

    pub fn inverse(&self) -> Result<DenseMatrix> {
        self.solve(&DenseMatrix::identity(self.n_rows))
    }

    fn require_square(&self, op: &'static str) -> Result<()> {
        if self.n_rows != self.n_cols {
            return Err(Error::DimensionMismatch {
                op,
                expected: self.n_rows,
                got: self.n_cols,
            });
        }
        Ok(())
    }
}

/// Largest singular value.
pub fn spectral_norm_2(m: &DenseMatrix) -> Result<f64> {
    Ok(m.singular_values()?.first().copied().unwrap_or(0.0))
}

/// All eigenvalues of a square matrix. The symmetric path uses nalgebra's
/// symmetric QR iteration and returns real values; the general path uses
/// faer's Hessenberg QR.
pub fn dense_eigensolve(m: &DenseMatrix, symmetric: bool) -> Result<Vec<Complex64>> {
    dense_eigensolve_capped(m, symmetric, dense_cap())
}

pub fn dense_eigensolve_capped(
    m: &DenseMatrix,
    symmetric: bool,
    cap: usize,
) -> Result<Vec<Complex64>> {
    m.require_square("dense_eigensolve")?;
    check_cap(m.n_rows, cap)?;
    if m.n_rows == 0 {
        return Ok(Vec::new());
    }
    if symmetric {
        let eig = nalgebra::SymmetricEigen::try_new(m.to_nalgebra(), f64::EPSILON, 10_000)
            .ok_or_else(|| Error::NoConvergence("symmetric eigensolver".into()))?;
        return Ok(eig
            .eigenvalues
            .iter()
            .map(|&v| Complex64::new(v, 0.0))
            .collect());
    }
    let f = faer::Mat::<f64>::from_fn(m.n_rows, m.n_cols, |i, j| m.get(i, j));
    let eig = f
        .eigenvalues()
        .map_err(|e| Error::NoConvergence(format!("general eigensolver: {e:?}")))?;
    Ok(eig.iter().map(|c| Complex64::new(c.re, c.im)).collect())
}

/// Lower Cholesky factor of a small SPD matrix. Fails when a pivot drops
/// below `rel_tol * scale`.
pub fn cholesky_lower(m: &DenseMatrix, rel_tol: f64, scale: f64) -> std::result::Result<DenseMatrix, (usize, f64)> {
    let n = m.n_rows;
    let mut l = DenseMatrix::zeros(n, n);
    for j in 0..n {
        let mut d = m.get(j, j);
        for k in 0..j {
            d -= l.get(j, k) * l.get(j, k);
        }
        if !(d > rel_tol * scale) {
            return Err((j, d));
        }
        let djj = d.sqrt();
        l.set(j, j, djj);
        for i in j + 1..n {
            let mut s = m.get(i, j);
            for k in 0..j {
                s -= l.get(i, k) * l.get(j, k);
            }
            l.set(i, j, s / djj);
        }
    }
    Ok(l)
}

/// Solves `L Lᵀ x = b` given the lower factor.
pub fn cholesky_solve(l: &DenseMatrix, b: &[f64]) -> Vec<f64> {
    let n = l.n_rows;
    let mut y = b.to_vec();
    for i in 0..n {
        for k in 0..i {
            y[i] -= l.get(i, k) * y[k];
        }
        y[i] /= l.get(i, i);
    }
    for i in (0..n).rev() {
        for k in i + 1..n {
            y[i] -= l.get(k, i) * y[k];
        }
        y[i] /= l.get(i, i);
    }
    y
}
