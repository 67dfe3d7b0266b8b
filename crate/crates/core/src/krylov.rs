//! Right-preconditioned restarted GMRES.
//!
//! The Krylov space is built on `op ∘ P` and the iterate is `x = P y`.
//! Orthogonalization is modified Gram-Schmidt with a second pass when the
//! first leaves more than `1e-8` relative overlap. Convergence is decided on
//! the true residual `‖b − op(x)‖`, recomputed at every restart and at exit,
//! relative to `‖b‖` (`x₀ = 0`).

use std::fmt::Write as _;
use std::path::Path;

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operator::LinearOperator;
use crate::precond::{cost_model, Preconditioner};
use crate::problem::SaddleSystem;
use crate::vector::{dot, norm2};

const REORTH_TOL: f64 = 1e-8;
const BREAKDOWN_TOL: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct GmresConfig {
    pub restart: usize,
    pub rel_tol: f64,
    pub max_iters: usize,
    pub record_history: bool,
}

impl Default for GmresConfig {
    fn default() -> Self {
        Self {
            restart: 100,
            rel_tol: 1e-8,
            max_iters: 1000,
            record_history: true,
        }
    }
}

impl GmresConfig {
    pub fn validate(&self) -> Result<()> {
        if self.restart == 0 {
            return Err(Error::InvalidParameter("restart must be >= 1".into()));
        }
        if !(self.rel_tol > 0.0 && self.rel_tol < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "rel_tol must lie in (0, 1), got {}",
                self.rel_tol
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceHistory {
    /// Absolute residual norms; entry 0 is `‖r₀‖`.
    pub residual_norms: Vec<f64>,
    /// `true` where the entry is a recomputed true residual, `false` for
    /// Arnoldi estimates.
    pub is_true_residual: Vec<bool>,
    pub iterations: usize,
    pub restarts: usize,
    pub converged: bool,
    pub initial_residual: f64,
    pub final_true_residual: f64,
    pub final_estimate: f64,
    pub c_app: f64,
    pub solve_cost_cs: f64,
}

impl ConvergenceHistory {
    pub fn relative_residuals(&self) -> Vec<f64> {
        self.residual_norms
            .iter()
            .map(|r| r / self.initial_residual)
            .collect()
    }

    pub fn final_relative_residual(&self) -> f64 {
        self.final_true_residual / self.initial_residual
    }

    /// CSV with header `iter,relative_residual`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("iter,relative_residual\n");
        for (i, r) in self.relative_residuals().iter().enumerate() {
            let _ = writeln!(s, "{i},{r:e}");
        }
        s
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

fn residual(op: &dyn LinearOperator, b: &[f64], x: &[f64]) -> Vec<f64> {
    let ax = op.apply_vec(x);
    b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect()
}

pub fn gmres(
    op: &dyn LinearOperator,
    precond: &dyn LinearOperator,
    b: &[f64],
    cfg: &GmresConfig,
) -> Result<(Vec<f64>, ConvergenceHistory)> {
    cfg.validate()?;
    let n = op.dim();
    for (what, got) in [("precond", precond.dim()), ("rhs", b.len())] {
        if got != n {
            return Err(Error::DimensionMismatch {
                op: if what == "rhs" { "gmres rhs" } else { "gmres precond" },
                expected: n,
                got,
            });
        }
    }
    let bnorm = norm2(b);
    if bnorm == 0.0 {
        return Err(Error::InvalidParameter("gmres: zero right-hand side".into()));
    }
    let target = cfg.rel_tol * bnorm;
    let m = cfg.restart;

    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut beta = bnorm;
    let mut norms = vec![bnorm];
    let mut flags = vec![true];
    let mut iters = 0;
    let mut restarts = 0;
    let mut estimate = bnorm;
    let mut converged = false;

    while iters < cfg.max_iters {
        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
        basis.push(r.iter().map(|v| v / beta).collect());
        // Hessenberg columns, already rotated
        let mut h: Vec<Vec<f64>> = Vec::with_capacity(m);
        let mut cs: Vec<f64> = Vec::with_capacity(m);
        let mut sn: Vec<f64> = Vec::with_capacity(m);
        let mut g = vec![beta];

        let mut k = 0;
        while k < m && iters < cfg.max_iters {
            let z = precond.apply_vec(&basis[k]);
            let mut w = op.apply_vec(&z);
            let w0 = norm2(&w);
            let mut col = vec![0.0; k + 2];
            for (j, v) in basis.iter().enumerate() {
                let hj = dot(&w, v);
                col[j] = hj;
                axpy(-hj, v, &mut w);
            }
            let wn = norm2(&w);
            if wn > 0.0 {
                let overlap = basis
                    .iter()
                    .map(|v| dot(&w, v).abs())
                    .fold(0.0, f64::max)
                    / wn;
                if overlap > REORTH_TOL {
                    for (j, v) in basis.iter().enumerate() {
                        let hj = dot(&w, v);
                        col[j] += hj;
                        axpy(-hj, v, &mut w);
                    }
                }
            }
            let hk1 = norm2(&w);
            col[k + 1] = hk1;
            for j in 0..k {
                let (c, s) = (cs[j], sn[j]);
                let (a, bb) = (col[j], col[j + 1]);
                col[j] = c * a + s * bb;
                col[j + 1] = -s * a + c * bb;
            }
            let (a, bb) = (col[k], col[k + 1]);
            let rho = a.hypot(bb);
            let (c, s) = if rho == 0.0 { (1.0, 0.0) } else { (a / rho, bb / rho) };
            col[k] = rho;
            col[k + 1] = 0.0;
            cs.push(c);
            sn.push(s);
            let gk = g[k];
            g[k] = c * gk;
            g.push(-s * gk);
            h.push(col);
            iters += 1;
            k += 1;
            estimate = g[k].abs();
            if cfg.record_history {
                norms.push(estimate);
                flags.push(false);
            }
            if hk1 <= BREAKDOWN_TOL * w0 || estimate <= target {
                break;
            }
            basis.push(w.iter().map(|v| v / hk1).collect());
        }

        // back substitution on the rotated triangle
        let mut y = vec![0.0; k];
        for i in (0..k).rev() {
            let mut s = g[i];
            for j in i + 1..k {
                s -= h[j][i] * y[j];
            }
            y[i] = if h[i][i] != 0.0 { s / h[i][i] } else { 0.0 };
        }
        let mut u = vec![0.0; n];
        for (yj, v) in y.iter().zip(&basis) {
            axpy(*yj, v, &mut u);
        }
        let pu = precond.apply_vec(&u);
        axpy(1.0, &pu, &mut x);

        r = residual(op, b, &x);
        beta = norm2(&r);
        if cfg.record_history {
            *norms.last_mut().expect("history starts non-empty") = beta;
            *flags.last_mut().expect("history starts non-empty") = true;
        }
        if beta <= target {
            converged = true;
            break;
        }
        if iters < cfg.max_iters {
            restarts += 1;
        }
    }
    if !cfg.record_history {
        norms.push(beta);
        flags.push(true);
    }

    Ok((
        x,
        ConvergenceHistory {
            residual_norms: norms,
            is_true_residual: flags,
            iterations: iters,
            restarts,
            converged,
            initial_residual: bnorm,
            final_true_residual: beta,
            final_estimate: estimate,
            c_app: 0.0,
            solve_cost_cs: 0.0,
        },
    ))
}

/// GMRES on the saddle operator with the system's right-hand side (all ones
/// when none is stored). Fills `c_app` and `C_s = n_it·(c_app + 1)`.
pub fn solve_saddle(
    system: &SaddleSystem,
    precond: &dyn Preconditioner,
    cfg: &GmresConfig,
) -> Result<(Vec<f64>, ConvergenceHistory)> {
    let rhs = system.rhs_or_ones();
    let (x, mut hist) = gmres(system, precond, rhs.as_slice(), cfg)?;
    let cm = cost_model(precond, system);
    hist.c_app = cm.c_app;
    hist.solve_cost_cs = hist.iterations as f64 * (cm.c_app + 1.0);
    Ok((x, hist))
}
