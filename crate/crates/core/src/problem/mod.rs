//! Saddle-point systems and their generators.

pub mod grid;
pub mod hex;
mod random;
mod verify;

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

pub use grid::{Axis, Face, FracturePlane, GridModel, GridParams};
pub use random::generate_random_spd_saddle;
pub use verify::{verify_system, SystemReport};

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::operator::LinearOperator;
use crate::sparse::SparseMatrix;
use crate::vector::Vector;

/// Provenance recorded alongside a generated system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct SystemLabels {
    pub generator: String,
    pub params: serde_json::Value,
    pub seed: Option<u64>,
    /// How the entries of B were weighted.
    pub multiplier_weighting: Option<String>,
}

impl SystemLabels {
    pub fn named(generator: &str) -> Self {
        Self {
            generator: generator.to_owned(),
            params: serde_json::Value::Null,
            seed: None,
            multiplier_weighting: None,
        }
    }
}

/// The saddle-point matrix `[[A, B], [Bᵀ, 0]]` with `A` symmetric (n_u x n_u)
/// and `B` of full column rank (n_u x n_t). `Bᵀ` is materialized once.
#[derive(Debug, Clone)]
pub struct SaddleSystem {
    a: SparseMatrix,
    b: SparseMatrix,
    bt: SparseMatrix,
    rhs: Option<Vector>,
    pub labels: SystemLabels,
}

impl SaddleSystem {
    pub fn new(a: SparseMatrix, b: SparseMatrix, labels: SystemLabels) -> Result<Self> {
        if a.n_rows() != a.n_cols() {
            return Err(Error::DimensionMismatch {
                op: "SaddleSystem: A square",
                expected: a.n_rows(),
                got: a.n_cols(),
            });
        }
        if b.n_rows() != a.n_rows() {
            return Err(Error::DimensionMismatch {
                op: "SaddleSystem: rows of B",
                expected: a.n_rows(),
                got: b.n_rows(),
            });
        }
        if !a.is_symmetric() {
            return Err(Error::InvalidParameter(format!(
                "A is not symmetric (defect {:e})",
                a.symmetry_defect()
            )));
        }
        if b.n_cols() >= a.n_rows() {
            return Err(Error::InvalidParameter(format!(
                "need n_u > n_t, got n_u={} n_t={}",
                a.n_rows(),
                b.n_cols()
            )));
        }
        let bt = b.transpose();
        Ok(Self {
            a,
            b,
            bt,
            rhs: None,
            labels,
        })
    }

    pub fn with_rhs(mut self, rhs: Vector) -> Result<Self> {
        if rhs.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                op: "SaddleSystem::with_rhs",
                expected: self.dim(),
                got: rhs.len(),
            });
        }
        self.rhs = Some(rhs);
        Ok(self)
    }

    pub fn a(&self) -> &SparseMatrix {
        &self.a
    }

    pub fn b(&self) -> &SparseMatrix {
        &self.b
    }

    pub fn bt(&self) -> &SparseMatrix {
        &self.bt
    }

    pub fn n_u(&self) -> usize {
        self.a.n_rows()
    }

    pub fn n_t(&self) -> usize {
        self.b.n_cols()
    }

    pub fn rhs(&self) -> Option<&Vector> {
        self.rhs.as_ref()
    }

    /// The stored right-hand side, or all ones.
    pub fn rhs_or_ones(&self) -> Vector {
        self.rhs.clone().unwrap_or_else(|| Vector::ones(self.dim()))
    }

    /// Flops of one block matvec.
    pub fn matvec_flops(&self) -> u64 {
        2 * (self.a.nnz() as u64 + 2 * self.b.nnz() as u64)
    }

    /// Dense `[[A, B], [Bᵀ, 0]]`.
    pub fn to_dense(&self) -> DenseMatrix {
        let (nu, nt) = (self.n_u(), self.n_t());
        let mut m = DenseMatrix::zeros(nu + nt, nu + nt);
        m.set_block(0, 0, &self.a.to_dense());
        m.set_block(0, nu, &self.b.to_dense());
        m.set_block(nu, 0, &self.bt.to_dense());
        m
    }
}

impl LinearOperator for SaddleSystem {
    fn dim(&self) -> usize {
        self.n_u() + self.n_t()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let nu = self.n_u();
        let (xu, xt) = x.split_at(nu);
        let (yu, yt) = y.split_at_mut(nu);
        yu.fill(0.0);
        yt.fill(0.0);
        self.a.spmv_acc(xu, yu);
        self.b.spmv_acc(xt, yu);
        self.bt.spmv_acc(xu, yt);
    }
}

fn grid_labels(name: &str, p: &GridParams) -> SystemLabels {
    SystemLabels {
        generator: name.to_owned(),
        params: serde_json::to_value(p).unwrap_or(serde_json::Value::Null),
        seed: None,
        multiplier_weighting: Some("tributary_area".into()),
    }
}

fn assemble(name: &str, p: &GridParams) -> Result<SaddleSystem> {
    let model = GridModel::build(p)?;
    let a = model.stiffness()?;
    let b = model.constraints()?;
    SaddleSystem::new(a, b, grid_labels(name, p))
}

fn touches_side(f: Face, frac: FracturePlane, plus_side: bool) -> bool {
    if f.axis() != frac.axis.index() {
        return true;
    }
    f.is_max() == plus_side
}

/// Fractured cube with Dirichlet faces on both sides of the fracture, so `A`
/// is SPD.
pub fn generate_fracture_cube(p: &GridParams) -> Result<SaddleSystem> {
    p.validate()?;
    if p.dirichlet_faces.is_empty() {
        return Err(Error::InvalidParameter("empty Dirichlet set".into()));
    }
    if let Some(frac) = p.fracture {
        for plus in [false, true] {
            if !p.dirichlet_faces.iter().any(|&f| touches_side(f, frac, plus)) {
                return Err(Error::InvalidParameter(format!(
                    "no Dirichlet face on the {} side of the fracture",
                    if plus { "plus" } else { "minus" }
                )));
            }
        }
    }
    assemble("fracture_cube", p)
}

/// Fractured cube whose Dirichlet faces do not cross the fracture. With a
/// single constrained side the other block floats and `A` has a six
/// dimensional null space.
pub fn generate_floating_side(p: &GridParams) -> Result<SaddleSystem> {
    p.validate()?;
    let frac = p.fracture.ok_or_else(|| {
        Error::InvalidParameter("floating-side generator needs a fracture".into())
    })?;
    if p.dirichlet_faces.is_empty() {
        return Err(Error::InvalidParameter("empty Dirichlet set".into()));
    }
    if let Some(f) = p
        .dirichlet_faces
        .iter()
        .find(|f| f.axis() != frac.axis.index())
    {
        return Err(Error::InvalidParameter(format!(
            "Dirichlet face {f:?} crosses the fracture"
        )));
    }
    assemble("floating_side", p)
}
