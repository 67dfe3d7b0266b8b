//! Approximations of `S_u⁻¹` used inside the block preconditioners.
//!
//! * `exact_factor`: envelope (skyline) Cholesky after reverse Cuthill-McKee
//!   reordering. Applies `S_u⁻¹` up to rounding.
//! * `jacobi`: `diag(S_u)⁻¹`.
//! * `ic0`: zero-fill incomplete Cholesky `L̃ L̃ᵀ`. A non-positive pivot
//!   triggers one retry on `S_u + 1e-3·diag(S_u)`.
//!
//! Flops are counted with multiply-adds as two and each triangular solve as
//! `2·nnz(factor)`.

use std::collections::VecDeque;
use std::fmt;

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::operator::LinearOperator;
use crate::sparse::SparseMatrix;

/// Relative pivot threshold (against the largest diagonal entry) below
/// which the exact factorization declares the matrix singular.
pub const EXACT_PIVOT_TOL: f64 = 1e-12;

/// Diagonal shift factor of the single IC(0) retry.
pub const IC0_SHIFT: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum InnerKind {
    ExactFactor,
    Jacobi,
    Ic0,
    /// User-supplied operator without an explicit SPD form.
    Custom,
}

impl fmt::Display for InnerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            InnerKind::ExactFactor => "exact_factor",
            InnerKind::Jacobi => "jacobi",
            InnerKind::Ic0 => "ic0",
            InnerKind::Custom => "custom",
        };
        f.write_str(s)
    }
}

/// Reverse Cuthill-McKee ordering of the symmetric pattern of `a`.
/// Returns `perm` with `perm[new] = old`.
pub fn reverse_cuthill_mckee(a: &SparseMatrix) -> Vec<usize> {
    let n = a.n_rows();
    let degree: Vec<usize> = (0..n).map(|i| a.row_cols(i).len()).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut by_degree: Vec<usize> = (0..n).collect();
    by_degree.sort_by_key(|&i| (degree[i], i));
    for &start in &by_degree {
        if visited[start] {
            continue;
        }
        visited[start] = true;
        let mut queue = VecDeque::from([start]);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut nbrs: Vec<usize> = a
                .row_cols(v)
                .iter()
                .copied()
                .filter(|&w| !visited[w])
                .collect();
            nbrs.sort_by_key(|&w| (degree[w], w));
            for w in nbrs {
                visited[w] = true;
                queue.push_back(w);
            }
        }
    }
    order.reverse();
    order
}

/// Envelope Cholesky `P S Pᵀ = L Lᵀ`.
#[derive(Debug, Clone)]
struct SkylineCholesky {
    perm: Vec<usize>,
    /// First stored column of each row.
    first: Vec<usize>,
    /// Start of each row segment in `values`.
    start: Vec<usize>,
    values: Vec<f64>,
}

impl SkylineCholesky {
    fn factor(s: &SparseMatrix) -> Result<Self> {
        let n = s.n_rows();
        let perm = reverse_cuthill_mckee(s);
        let mut inv = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let mut first: Vec<usize> = (0..n).collect();
        for old in 0..n {
            let i = inv[old];
            for &c in s.row_cols(old) {
                let j = inv[c];
                if j < i {
                    first[i] = first[i].min(j);
                }
            }
        }
        let mut start = Vec::with_capacity(n + 1);
        let mut len = 0;
        for i in 0..n {
            start.push(len);
            len += i - first[i] + 1;
        }
        start.push(len);
        let mut values = vec![0.0; len];
        for old in 0..n {
            let i = inv[old];
            for (c, v) in s.row(old) {
                let j = inv[c];
                if j <= i {
                    values[start[i] + j - first[i]] = v;
                }
            }
        }
        let max_diag = s.diagonal().iter().fold(0.0f64, |m, d| m.max(d.abs()));
        let tol = EXACT_PIVOT_TOL * max_diag;

        for i in 0..n {
            let fi = first[i];
            for j in fi..i {
                let fj = first[j];
                let k0 = fi.max(fj);
                let mut sum = values[start[i] + j - fi];
                for k in k0..j {
                    sum -= values[start[i] + k - fi] * values[start[j] + k - fj];
                }
                values[start[i] + j - fi] = sum / values[start[j] + j - fj];
            }
            let mut d = values[start[i] + i - fi];
            for k in fi..i {
                let l = values[start[i] + k - fi];
                d -= l * l;
            }
            if !(d > tol) {
                return Err(Error::FactorizationBreakdown {
                    index: perm[i],
                    pivot: d,
                    context: "exact Cholesky: matrix singular or indefinite",
                });
            }
            values[start[i] + i - fi] = d.sqrt();
        }
        Ok(Self {
            perm,
            first,
            start,
            values,
        })
    }

    fn nnz(&self) -> usize {
        self.values.len()
    }

    fn solve(&self, x: &[f64], y: &mut [f64]) {
        let n = self.perm.len();
        let mut z: Vec<f64> = self.perm.iter().map(|&old| x[old]).collect();
        for i in 0..n {
            let fi = self.first[i];
            let row = &self.values[self.start[i]..self.start[i + 1]];
            let mut s = z[i];
            for (k, l) in (fi..i).zip(row) {
                s -= l * z[k];
            }
            z[i] = s / row[i - fi];
        }
        for i in (0..n).rev() {
            let fi = self.first[i];
            let row = &self.values[self.start[i]..self.start[i + 1]];
            z[i] /= row[i - fi];
            let zi = z[i];
            for (k, l) in (fi..i).zip(row) {
                z[k] -= l * zi;
            }
        }
        for (new, &old) in self.perm.iter().enumerate() {
            y[old] = z[new];
        }
    }
}

/// Zero-fill incomplete Cholesky on the lower pattern of `S`.
#[derive(Debug, Clone)]
struct IncompleteCholesky {
    /// Lower factor in CSR, diagonal last in each row.
    l: SparseMatrix,
}

impl IncompleteCholesky {
    fn factor(s: &SparseMatrix, shift: f64) -> std::result::Result<Self, (usize, f64)> {
        let n = s.n_rows();
        let mut row_offsets = vec![0];
        let mut cols = Vec::new();
        for i in 0..n {
            cols.extend(s.row_cols(i).iter().copied().filter(|&j| j <= i));
            if cols.last() != Some(&i) {
                // structurally missing diagonal
                return Err((i, 0.0));
            }
            row_offsets.push(cols.len());
        }
        let mut vals = vec![0.0; cols.len()];
        let mut diag_pos = vec![0; n];
        for i in 0..n {
            for p in row_offsets[i]..row_offsets[i + 1] {
                vals[p] = s.get(i, cols[p]);
            }
            diag_pos[i] = row_offsets[i + 1] - 1;
            vals[diag_pos[i]] *= 1.0 + shift;
        }
        // dense scatter of the current row for the inner products
        let mut work = vec![0.0; n];
        let mut in_row = vec![false; n];
        for i in 0..n {
            let (ri, re) = (row_offsets[i], row_offsets[i + 1]);
            for p in ri..re - 1 {
                let k = cols[p];
                let mut sum = vals[p];
                for q in row_offsets[k]..row_offsets[k + 1] - 1 {
                    let j = cols[q];
                    if in_row[j] {
                        sum -= work[j] * vals[q];
                    }
                }
                let lik = sum / vals[diag_pos[k]];
                vals[p] = lik;
                work[k] = lik;
                in_row[k] = true;
            }
            let mut d = vals[re - 1];
            for p in ri..re - 1 {
                d -= vals[p] * vals[p];
            }
            for p in ri..re - 1 {
                in_row[cols[p]] = false;
                work[cols[p]] = 0.0;
            }
            if !(d > 0.0) {
                return Err((i, d));
            }
            vals[re - 1] = d.sqrt();
        }
        let l = SparseMatrix::try_new(n, n, row_offsets, cols, vals)
            .expect("lower pattern of a valid matrix");
        Ok(Self { l })
    }

    fn solve(&self, x: &[f64], y: &mut [f64]) {
        let n = self.l.n_rows();
        let (ro, ci, v) = (self.l.row_offsets(), self.l.col_indices(), self.l.values());
        y.copy_from_slice(x);
        for i in 0..n {
            let mut s = y[i];
            for p in ro[i]..ro[i + 1] - 1 {
                s -= v[p] * y[ci[p]];
            }
            y[i] = s / v[ro[i + 1] - 1];
        }
        for i in (0..n).rev() {
            y[i] /= v[ro[i + 1] - 1];
            let yi = y[i];
            for p in ro[i]..ro[i + 1] - 1 {
                y[ci[p]] -= v[p] * yi;
            }
        }
    }
}

enum InnerImpl {
    Exact(SkylineCholesky),
    Jacobi(Vec<f64>),
    Ic0(IncompleteCholesky),
    Custom(Box<dyn LinearOperator + Send + Sync>),
}

impl fmt::Debug for InnerImpl {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InnerImpl::Exact(c) => write!(f, "Exact(nnz={})", c.nnz()),
            InnerImpl::Jacobi(d) => write!(f, "Jacobi(n={})", d.len()),
            InnerImpl::Ic0(c) => write!(f, "Ic0(nnz={})", c.l.nnz()),
            InnerImpl::Custom(_) => f.write_str("Custom"),
        }
    }
}

/// A symmetric linear approximation of `S⁻¹` for some SPD `S`.
#[derive(Debug)]
pub struct InnerSolver {
    kind: InnerKind,
    imp: InnerImpl,
    n: usize,
    flops_per_apply: u64,
    /// The matrix the solver was built on (exact and jacobi spd forms).
    source: Option<SparseMatrix>,
    /// True when IC(0) needed the diagonal shift.
    pub shifted: bool,
}

impl InnerSolver {
    pub fn build(kind: InnerKind, s: &SparseMatrix) -> Result<Self> {
        if s.n_rows() != s.n_cols() {
            return Err(Error::DimensionMismatch {
                op: "InnerSolver::build",
                expected: s.n_rows(),
                got: s.n_cols(),
            });
        }
        let n = s.n_rows();
        let mut shifted = false;
        let (imp, flops) = match kind {
            InnerKind::ExactFactor => {
                let f = SkylineCholesky::factor(s)?;
                let flops = 4 * f.nnz() as u64;
                (InnerImpl::Exact(f), flops)
            }
            InnerKind::Jacobi => {
                let d = s.diagonal();
                if let Some(i) = d.iter().position(|&v| !(v > 0.0)) {
                    return Err(Error::FactorizationBreakdown {
                        index: i,
                        pivot: d[i],
                        context: "jacobi: non-positive diagonal",
                    });
                }
                (InnerImpl::Jacobi(d.iter().map(|v| 1.0 / v).collect()), n as u64)
            }
            InnerKind::Ic0 => {
                let f = match IncompleteCholesky::factor(s, 0.0) {
                    Ok(f) => f,
                    Err(_) => {
                        shifted = true;
                        IncompleteCholesky::factor(s, IC0_SHIFT).map_err(|(index, pivot)| {
                            Error::FactorizationBreakdown {
                                index,
                                pivot,
                                context: "ic0: breakdown persists after diagonal shift",
                            }
                        })?
                    }
                };
                let flops = 4 * f.l.nnz() as u64;
                (InnerImpl::Ic0(f), flops)
            }
            InnerKind::Custom => {
                return Err(Error::InvalidParameter(
                    "custom inner solvers are built with InnerSolver::custom".into(),
                ))
            }
        };
        Ok(Self {
            kind,
            imp,
            n,
            flops_per_apply: flops,
            source: matches!(kind, InnerKind::ExactFactor | InnerKind::Jacobi).then(|| s.clone()),
            shifted,
        })
    }

    /// Wraps an arbitrary operator; it has no explicit SPD form.
    pub fn custom(op: Box<dyn LinearOperator + Send + Sync>, flops_per_apply: u64) -> Self {
        let n = op.dim();
        Self {
            kind: InnerKind::Custom,
            imp: InnerImpl::Custom(op),
            n,
            flops_per_apply,
            source: None,
            shifted: false,
        }
    }

    pub fn kind(&self) -> InnerKind {
        self.kind
    }

    pub fn flops_per_apply(&self) -> u64 {
        self.flops_per_apply
    }

    /// Nonzeros of the stored factor (diagonal length for jacobi).
    pub fn factor_nnz(&self) -> usize {
        match &self.imp {
            InnerImpl::Exact(f) => f.nnz(),
            InnerImpl::Jacobi(d) => d.len(),
            InnerImpl::Ic0(f) => f.l.nnz(),
            InnerImpl::Custom(_) => 0,
        }
    }

    /// Dense `Ŝ` such that this solver applies `Ŝ⁻¹`.
    pub fn spd_form(&self) -> Result<DenseMatrix> {
        match &self.imp {
            InnerImpl::Exact(_) => Ok(self.source.as_ref().expect("exact keeps source").to_dense()),
            InnerImpl::Jacobi(_) => Ok(DenseMatrix::from_diagonal(
                &self.source.as_ref().expect("jacobi keeps source").diagonal(),
            )),
            InnerImpl::Ic0(f) => {
                let l = f.l.to_dense();
                l.matmul(&l.transpose())
            }
            InnerImpl::Custom(_) => Err(Error::MissingSpdForm),
        }
    }
}

impl LinearOperator for InnerSolver {
    fn dim(&self) -> usize {
        self.n
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        match &self.imp {
            InnerImpl::Exact(f) => f.solve(x, y),
            InnerImpl::Jacobi(d) => {
                for ((yi, xi), di) in y.iter_mut().zip(x).zip(d) {
                    *yi = xi * di;
                }
            }
            InnerImpl::Ic0(f) => f.solve(x, y),
            InnerImpl::Custom(op) => op.apply(x, y),
        }
    }
}
