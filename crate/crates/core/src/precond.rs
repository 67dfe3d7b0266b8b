//! Block preconditioners for the saddle-point operator.
//!
//! RACP applies the inverse of a block factorization of the augmented
//! matrix through its primal Schur complement `S_u = A + B C⁻¹ Bᵀ`:
//!
//! ```text
//! M⁻¹  = [I 0; C⁻¹Bᵀ I] · diag(S̃_u⁻¹, −C⁻¹) · [I  BC⁻¹; 0 I]
//! Mₐ⁻¹ = [I 0; C⁻¹Bᵀ I] · diag(S̃_u⁻¹, +C⁻¹) · [I −BC⁻¹; 0 I]
//! ```
//!
//! MCP is the classical block LDU inverse built from `Ã ≈ A` and
//! `S̃ ≈ −Bᵀ A⁻¹ B`; it needs a nonsingular `A`.

use std::fmt;

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::augmentation::{form_primal_schur_any, Augmentation, PrimalSchur};
use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::inner::{InnerKind, InnerSolver};
use crate::operator::LinearOperator;
use crate::problem::SaddleSystem;
use crate::sparse::SparseMatrix;

/// A built, immutable preconditioner with a per-apply flop count.
pub trait Preconditioner: LinearOperator + Send + Sync {
    fn flops_per_apply(&self) -> u64;
    fn name(&self) -> String;
}

#[derive(Debug, Clone)]
pub struct IdentityPreconditioner {
    n: usize,
}

impl IdentityPreconditioner {
    pub fn new(n: usize) -> Self {
        Self { n }
    }
}

impl LinearOperator for IdentityPreconditioner {
    fn dim(&self) -> usize {
        self.n
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        y.copy_from_slice(x);
    }
}

impl Preconditioner for IdentityPreconditioner {
    fn flops_per_apply(&self) -> u64 {
        0
    }

    fn name(&self) -> String {
        "identity".into()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
pub enum RacpVariant {
    M,
    Ma,
}

impl fmt::Display for RacpVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RacpVariant::M => "M",
            RacpVariant::Ma => "Ma",
        })
    }
}

#[derive(Debug)]
enum CBlock {
    /// `C⁻¹`, `B C⁻¹` and `C⁻¹ Bᵀ` precomputed.
    Diagonal {
        cinv: Vec<f64>,
        b_cinv: SparseMatrix,
        cinv_bt: SparseMatrix,
    },
    Dense {
        cinv: DenseMatrix,
        b: SparseMatrix,
        bt: SparseMatrix,
    },
}

#[derive(Debug)]
pub struct RacpPreconditioner {
    variant: RacpVariant,
    c: Augmentation,
    cblock: CBlock,
    inner: InnerSolver,
    s_u: Option<PrimalSchur>,
    n_u: usize,
    n_t: usize,
    flops: u64,
}

impl RacpPreconditioner {
    /// Forms `S_u` for the given `C`, builds the inner solver on it and
    /// assembles the preconditioner.
    pub fn build(
        system: &SaddleSystem,
        variant: RacpVariant,
        c: Augmentation,
        inner: InnerKind,
    ) -> Result<Self> {
        let s_u = form_primal_schur_any(system.a(), system.b(), &c)?;
        let inner = InnerSolver::build(inner, &s_u.s_u)?;
        let mut p = Self::from_parts(variant, system.b(), c, inner)?;
        p.s_u = Some(s_u);
        Ok(p)
    }

    /// Assembles from explicit parts; `B` may be anything of matching shape.
    pub fn from_parts(
        variant: RacpVariant,
        b: &SparseMatrix,
        c: Augmentation,
        inner: InnerSolver,
    ) -> Result<Self> {
        let (n_u, n_t) = (b.n_rows(), b.n_cols());
        if c.len() != n_t {
            return Err(Error::DimensionMismatch {
                op: "RacpPreconditioner: C",
                expected: n_t,
                got: c.len(),
            });
        }
        if inner.dim() != n_u {
            return Err(Error::DimensionMismatch {
                op: "RacpPreconditioner: inner",
                expected: n_u,
                got: inner.dim(),
            });
        }
        let (cblock, c_flops) = match &c {
            Augmentation::Diagonal(d) => {
                let cinv = d.inverse();
                let b_cinv = b.scale_columns(&cinv)?;
                let cinv_bt = b_cinv.transpose();
                let flops = b_cinv.spmv_flops() + cinv_bt.spmv_flops() + n_t as u64;
                (
                    CBlock::Diagonal {
                        cinv,
                        b_cinv,
                        cinv_bt,
                    },
                    flops,
                )
            }
            Augmentation::Dense(d) => {
                let cinv = d.inverse();
                let flops = 2 * b.spmv_flops() + 2 * (2 * (n_t * n_t) as u64);
                (
                    CBlock::Dense {
                        cinv,
                        b: b.clone(),
                        bt: b.transpose(),
                    },
                    flops,
                )
            }
        };
        let flops = c_flops + inner.flops_per_apply();
        Ok(Self {
            variant,
            c,
            cblock,
            inner,
            s_u: None,
            n_u,
            n_t,
            flops,
        })
    }

    pub fn variant(&self) -> RacpVariant {
        self.variant
    }

    pub fn c(&self) -> &Augmentation {
        &self.c
    }

    pub fn inner(&self) -> &InnerSolver {
        &self.inner
    }

    pub fn primal_schur(&self) -> Option<&PrimalSchur> {
        self.s_u.as_ref()
    }
}

impl LinearOperator for RacpPreconditioner {
    fn dim(&self) -> usize {
        self.n_u + self.n_t
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.dim(), "RACP apply: input length");
        assert_eq!(y.len(), self.dim(), "RACP apply: output length");
        let (v_u, v_t) = x.split_at(self.n_u);
        let (w_u, w_t) = y.split_at_mut(self.n_u);
        // sign of the C⁻¹ v_t contributions
        let s = match self.variant {
            RacpVariant::M => 1.0,
            RacpVariant::Ma => -1.0,
        };
        let mut t1 = v_u.to_vec();
        let cinv_vt = match &self.cblock {
            CBlock::Diagonal {
                cinv,
                b_cinv,
                cinv_bt,
            } => {
                let bc = b_cinv.spmv(v_t).expect("shape checked at build");
                for (t, b) in t1.iter_mut().zip(&bc) {
                    *t += s * b;
                }
                self.inner.apply(&t1, w_u);
                cinv_bt.apply(w_u, w_t);
                v_t.iter().zip(cinv).map(|(v, c)| v * c).collect::<Vec<_>>()
            }
            CBlock::Dense { cinv, b, bt } => {
                let cv = cinv.matvec(v_t);
                let bc = b.spmv(&cv).expect("shape checked at build");
                for (t, b) in t1.iter_mut().zip(&bc) {
                    *t += s * b;
                }
                self.inner.apply(&t1, w_u);
                let btw = bt.spmv(w_u).expect("shape checked at build");
                w_t.copy_from_slice(&cinv.matvec(&btw));
                cv
            }
        };
        for (w, c) in w_t.iter_mut().zip(&cinv_vt) {
            *w -= s * c;
        }
    }
}

impl Preconditioner for RacpPreconditioner {
    fn flops_per_apply(&self) -> u64 {
        self.flops
    }

    fn name(&self) -> String {
        format!("racp-{}({})", self.variant, self.inner.kind())
    }
}

/// Approximation of the dual Schur complement inside MCP.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum SchurApprox {
    /// `S̃ = −Bᵀ diag(A)⁻¹ B`.
    DiagA,
    /// `S̃ = −Bᵀ A⁻¹ B`, formed densely (desk scale only).
    ExactDense,
}

#[derive(Debug)]
pub struct McpPreconditioner {
    inner_a: InnerSolver,
    /// Solver for `−S̃`, which is SPD.
    neg_schur: InnerSolver,
    b: SparseMatrix,
    bt: SparseMatrix,
    schur: SchurApprox,
    n_u: usize,
    n_t: usize,
    flops: u64,
}

impl McpPreconditioner {
    /// Fails with [`Error::SingularLeadingBlock`] when `A` is singular. The
    /// check is a Cholesky factorization of `A` made regardless of
    /// `inner_a`.
    pub fn build(system: &SaddleSystem, inner_a: InnerKind, schur: SchurApprox) -> Result<Self> {
        let a = system.a();
        let singular = |e: Error| match e {
            Error::FactorizationBreakdown { index, pivot, .. } => Error::SingularLeadingBlock(
                format!("Cholesky of A broke down at row {index} (pivot {pivot:e})"),
            ),
            other => other,
        };
        let exact = InnerSolver::build(InnerKind::ExactFactor, a).map_err(singular)?;
        let inner_a = if inner_a == InnerKind::ExactFactor {
            exact
        } else {
            InnerSolver::build(inner_a, a).map_err(singular)?
        };
        let (b, bt) = (system.b().clone(), system.bt().clone());
        let neg_s = match schur {
            SchurApprox::DiagA => {
                let dinv: Vec<f64> = a.diagonal().iter().map(|d| 1.0 / d).collect();
                bt.scale_columns(&dinv)?.spmm(&b)?
            }
            SchurApprox::ExactDense => {
                let ainv_b = a.to_dense().solve(&b.to_dense())?;
                let s = bt.to_dense().matmul(&ainv_b)?;
                let n = s.n_rows();
                let mut sym = s.clone();
                for i in 0..n {
                    for j in 0..n {
                        sym.set(i, j, 0.5 * (s.get(i, j) + s.get(j, i)));
                    }
                }
                SparseMatrix::from_dense(&sym)
            }
        };
        let neg_schur = InnerSolver::build(InnerKind::ExactFactor, &neg_s)?;
        let flops = 2 * inner_a.flops_per_apply()
            + b.spmv_flops()
            + bt.spmv_flops()
            + neg_schur.flops_per_apply();
        Ok(Self {
            inner_a,
            neg_schur,
            n_u: b.n_rows(),
            n_t: b.n_cols(),
            b,
            bt,
            schur,
            flops,
        })
    }

    pub fn inner_a(&self) -> &InnerSolver {
        &self.inner_a
    }

    pub fn schur_approx(&self) -> SchurApprox {
        self.schur
    }

    /// Dense `S̃` (negative definite).
    pub fn schur_dense(&self) -> Result<DenseMatrix> {
        Ok(self.neg_schur.spd_form()?.scale(-1.0))
    }
}

impl LinearOperator for McpPreconditioner {
    fn dim(&self) -> usize {
        self.n_u + self.n_t
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.dim(), "MCP apply: input length");
        assert_eq!(y.len(), self.dim(), "MCP apply: output length");
        let (v_u, v_t) = x.split_at(self.n_u);
        let (w_u, w_t) = y.split_at_mut(self.n_u);
        let z_u = self.inner_a.apply_vec(v_u);
        let mut z_t = self.bt.spmv(&z_u).expect("shape checked at build");
        for (z, v) in z_t.iter_mut().zip(v_t) {
            *z -= v;
        }
        // w_t = S̃⁻¹(v_t − Bᵀz_u) = (−S̃)⁻¹(Bᵀz_u − v_t)
        self.neg_schur.apply(&z_t, w_t);
        let bw = self.b.spmv(w_t).expect("shape checked at build");
        let corr = self.inner_a.apply_vec(&bw);
        for ((w, z), c) in w_u.iter_mut().zip(&z_u).zip(&corr) {
            *w = z - c;
        }
    }
}

impl Preconditioner for McpPreconditioner {
    fn flops_per_apply(&self) -> u64 {
        self.flops
    }

    fn name(&self) -> String {
        format!("mcp({})", self.inner_a.kind())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct CostModel {
    pub c_app: f64,
    pub flops: u64,
}

/// `c_app = flops / (2·(nnz(A) + 2·nnz(B)))`, the cost of one apply in
/// units of a saddle matvec.
pub fn cost_model(p: &dyn Preconditioner, system: &SaddleSystem) -> CostModel {
    let flops = p.flops_per_apply();
    CostModel {
        c_app: flops as f64 / system.matvec_flops() as f64,
        flops,
    }
}
