//! The augmentation block `C` and the primal Schur complement
//! `S_u = A + B C⁻¹ Bᵀ`.
//!
//! Three diagonal recipes are provided. For column `b_i` of `B`, let `r(b_i)`
//! be its nonzero values and `A|b_i` the dense block of `A` gathered at the
//! rows of those nonzeros:
//!
//! * `local_solve`: `C_ii = r(b_i)ᵀ (A|b_i)⁻¹ r(b_i)`, a local estimate of the
//!   diagonal of `Bᵀ A⁻¹ B`. Fails when a local block is singular.
//! * `norm_ratio`: `C_ii = ω ‖r(b_i)‖₂² / ‖A|b_i‖₂`. Defined whenever the
//!   local block is nonzero, singular or not.
//! * `global_gamma`: `C = γ I` with `γ = ‖B‖_F² / ‖A‖_F`.
//!
//! A dense `C` is also supported for the ideal choice `C = Bᵀ A⁻¹ B`.

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::dense::{cholesky_lower, cholesky_solve, spectral_norm_2, DenseMatrix};
use crate::error::{Error, Result};
use crate::sparse::SparseMatrix;

/// Pivot threshold, relative to `‖A|b_i‖₂`, below which a local block is
/// declared singular.
pub const LOCAL_PIVOT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum CRecipe {
    LocalSolve,
    NormRatio,
    GlobalGamma,
}

/// Diagonal SPD augmentation matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentationDiag {
    entries: Vec<f64>,
    pub recipe: CRecipe,
    pub omega: Option<f64>,
    pub gamma: Option<f64>,
    /// Matrix norm used by `global_gamma`.
    pub norm: Option<String>,
}

impl AugmentationDiag {
    /// Wraps explicit entries; every entry must be finite and positive.
    pub fn from_entries(entries: Vec<f64>, recipe: CRecipe) -> Result<Self> {
        if let Some(i) = entries.iter().position(|&c| !(c > 0.0 && c.is_finite())) {
            return Err(Error::InvalidParameter(format!(
                "augmentation entry {i} is not positive ({})",
                entries[i]
            )));
        }
        Ok(Self {
            entries,
            recipe,
            omega: None,
            gamma: None,
            norm: None,
        })
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn inverse(&self) -> Vec<f64> {
        self.entries.iter().map(|c| 1.0 / c).collect()
    }

    pub fn to_sparse(&self) -> SparseMatrix {
        SparseMatrix::from_diagonal(&self.entries)
    }
}

fn check_shapes(a: &SparseMatrix, b: &SparseMatrix) -> Result<()> {
    if a.n_rows() != a.n_cols() || b.n_rows() != a.n_rows() {
        return Err(Error::DimensionMismatch {
            op: "augmentation",
            expected: a.n_rows(),
            got: b.n_rows(),
        });
    }
    Ok(())
}

/// `(rows, values)` of each column of `b`.
fn columns(b: &SparseMatrix) -> Vec<(Vec<usize>, Vec<f64>)> {
    let bt = b.transpose();
    (0..b.n_cols())
        .map(|j| bt.row(j).unzip())
        .collect()
}

pub fn compute_c_local_solve(a: &SparseMatrix, b: &SparseMatrix) -> Result<AugmentationDiag> {
    check_shapes(a, b)?;
    let mut entries = Vec::with_capacity(b.n_cols());
    for (i, (rows, r)) in columns(b).into_iter().enumerate() {
        if rows.is_empty() {
            return Err(Error::EmptyColumn(i));
        }
        let block = a.gather_submatrix(&rows)?;
        let scale = spectral_norm_2(&block)?;
        let l = cholesky_lower(&block, LOCAL_PIVOT_TOL, scale)
            .map_err(|(_, pivot)| Error::SingularLocalBlock { column: i, pivot })?;
        let y = cholesky_solve(&l, &r);
        entries.push(r.iter().zip(&y).map(|(p, q)| p * q).sum());
    }
    AugmentationDiag::from_entries(entries, CRecipe::LocalSolve)
}

pub fn compute_c_norm_ratio(
    a: &SparseMatrix,
    b: &SparseMatrix,
    omega: f64,
) -> Result<AugmentationDiag> {
    check_shapes(a, b)?;
    if !(omega > 0.0 && omega.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "omega must be positive, got {omega}"
        )));
    }
    let mut entries = Vec::with_capacity(b.n_cols());
    for (i, (rows, r)) in columns(b).into_iter().enumerate() {
        let r_sq: f64 = r.iter().map(|v| v * v).sum();
        if rows.is_empty() || r_sq == 0.0 {
            return Err(Error::EmptyColumn(i));
        }
        let block_norm = spectral_norm_2(&a.gather_submatrix(&rows)?)?;
        if block_norm == 0.0 {
            return Err(Error::ZeroBlockNorm(i));
        }
        entries.push(omega * r_sq / block_norm);
    }
    let mut c = AugmentationDiag::from_entries(entries, CRecipe::NormRatio)?;
    c.omega = Some(omega);
    Ok(c)
}

pub fn compute_c_global(a: &SparseMatrix, b: &SparseMatrix) -> Result<AugmentationDiag> {
    check_shapes(a, b)?;
    let (na, nb) = (a.frobenius_norm(), b.frobenius_norm());
    if na == 0.0 || nb == 0.0 {
        return Err(Error::InvalidParameter(
            "global augmentation needs nonzero A and B".into(),
        ));
    }
    let gamma = nb * nb / na;
    let mut c = AugmentationDiag::from_entries(vec![gamma; b.n_cols()], CRecipe::GlobalGamma)?;
    c.gamma = Some(gamma);
    c.norm = Some("frobenius".into());
    Ok(c)
}

pub fn compute_c(
    recipe: CRecipe,
    a: &SparseMatrix,
    b: &SparseMatrix,
    omega: f64,
) -> Result<AugmentationDiag> {
    match recipe {
        CRecipe::LocalSolve => compute_c_local_solve(a, b),
        CRecipe::NormRatio => compute_c_norm_ratio(a, b, omega),
        CRecipe::GlobalGamma => compute_c_global(a, b),
    }
}

/// Dense SPD augmentation, used for the ideal `C = Bᵀ A⁻¹ B`.
#[derive(Debug, Clone)]
pub struct DenseAugmentation {
    c: DenseMatrix,
    chol: DenseMatrix,
}

impl DenseAugmentation {
    pub fn new(c: DenseMatrix) -> Result<Self> {
        let scale = c.max_abs();
        let chol = cholesky_lower(&c, 1e-14, scale).map_err(|(index, pivot)| {
            Error::FactorizationBreakdown {
                index,
                pivot,
                context: "dense augmentation is not SPD",
            }
        })?;
        Ok(Self { c, chol })
    }

    /// `C = Bᵀ A⁻¹ B` by dense solves; `A` must be nonsingular.
    pub fn ideal(a: &SparseMatrix, b: &SparseMatrix) -> Result<Self> {
        let ainv_b = a.to_dense().solve(&b.to_dense())?;
        let c = b.transpose().to_dense().matmul(&ainv_b)?;
        // symmetrize away rounding
        let n = c.n_rows();
        let mut sym = c.clone();
        for i in 0..n {
            for j in 0..n {
                sym.set(i, j, 0.5 * (c.get(i, j) + c.get(j, i)));
            }
        }
        Self::new(sym)
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.c
    }

    pub fn len(&self) -> usize {
        self.c.n_rows()
    }

    pub fn is_empty(&self) -> bool {
        self.c.n_rows() == 0
    }

    pub fn solve(&self, x: &[f64]) -> Vec<f64> {
        cholesky_solve(&self.chol, x)
    }

    pub fn inverse(&self) -> DenseMatrix {
        let n = self.len();
        let mut out = DenseMatrix::zeros(n, n);
        let mut e = vec![0.0; n];
        for j in 0..n {
            e[j] = 1.0;
            out.set_column(j, &self.solve(&e));
            e[j] = 0.0;
        }
        out
    }
}

/// Either kind of augmentation block.
#[derive(Debug, Clone)]
pub enum Augmentation {
    Diagonal(AugmentationDiag),
    Dense(DenseAugmentation),
}

impl Augmentation {
    pub fn len(&self) -> usize {
        match self {
            Augmentation::Diagonal(c) => c.len(),
            Augmentation::Dense(c) => c.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn to_dense(&self) -> DenseMatrix {
        match self {
            Augmentation::Diagonal(c) => DenseMatrix::from_diagonal(c.entries()),
            Augmentation::Dense(c) => c.matrix().clone(),
        }
    }

    pub fn inverse_dense(&self) -> DenseMatrix {
        match self {
            Augmentation::Diagonal(c) => DenseMatrix::from_diagonal(&c.inverse()),
            Augmentation::Dense(c) => c.inverse(),
        }
    }
}

impl From<AugmentationDiag> for Augmentation {
    fn from(c: AugmentationDiag) -> Self {
        Augmentation::Diagonal(c)
    }
}

impl From<DenseAugmentation> for Augmentation {
    fn from(c: DenseAugmentation) -> Self {
        Augmentation::Dense(c)
    }
}

/// `S_u = A + B C⁻¹ Bᵀ`, symmetric in stored values.
#[derive(Debug, Clone)]
pub struct PrimalSchur {
    pub s_u: SparseMatrix,
}

/// Forms `S_u` as `A + (B C^{-1/2})(B C^{-1/2})ᵀ`. The split square root keeps
/// the product bitwise symmetric; the pattern is exactly
/// `pattern(A) ∪ pattern(B Bᵀ)`.
pub fn form_primal_schur(
    a: &SparseMatrix,
    b: &SparseMatrix,
    c: &AugmentationDiag,
) -> Result<PrimalSchur> {
    check_shapes(a, b)?;
    if c.len() != b.n_cols() {
        return Err(Error::DimensionMismatch {
            op: "form_primal_schur",
            expected: b.n_cols(),
            got: c.len(),
        });
    }
    let half: Vec<f64> = c.entries().iter().map(|v| 1.0 / v.sqrt()).collect();
    let bh = b.scale_columns(&half)?;
    let bcbt = bh.spmm(&bh.transpose())?;
    Ok(PrimalSchur {
        s_u: a.add(&bcbt)?,
    })
}

/// Dense-`C` variant: `S_u = A + B C⁻¹ Bᵀ` stored on its full dense pattern.
pub fn form_primal_schur_dense(
    a: &SparseMatrix,
    b: &SparseMatrix,
    c: &DenseAugmentation,
) -> Result<PrimalSchur> {
    check_shapes(a, b)?;
    let bd = b.to_dense();
    let cinv_bt = c.inverse().matmul(&bd.transpose())?;
    let mut s = a.to_dense().add(&bd.matmul(&cinv_bt)?);
    let n = s.n_rows();
    for i in 0..n {
        for j in i + 1..n {
            let v = 0.5 * (s.get(i, j) + s.get(j, i));
            s.set(i, j, v);
            s.set(j, i, v);
        }
    }
    Ok(PrimalSchur {
        s_u: SparseMatrix::from_dense(&s),
    })
}

pub fn form_primal_schur_any(
    a: &SparseMatrix,
    b: &SparseMatrix,
    c: &Augmentation,
) -> Result<PrimalSchur> {
    match c {
        Augmentation::Diagonal(d) => form_primal_schur(a, b, d),
        Augmentation::Dense(d) => form_primal_schur_dense(a, b, d),
    }
}
