use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use super::SaddleSystem;
use crate::error::Result;

/// Dense desk-scale diagnostics of a [`SaddleSystem`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct SystemReport {
    pub n_u: usize,
    pub n_t: usize,
    pub symmetry_defect: f64,
    pub lambda_min_a: f64,
    pub lambda_max_a: f64,
    /// Eigenvalues of A with |λ| ≤ 1e-10·λ_max.
    pub nullity_a: usize,
    pub sigma_min_b: f64,
    pub rank_saddle: usize,
    pub a_spsd: bool,
    pub a_spd: bool,
    pub b_full_rank: bool,
    pub saddle_nonsingular: bool,
    pub summary: String,
}

pub fn verify_system(s: &SaddleSystem) -> Result<SystemReport> {
    let (eigs, _) = s.a().to_dense().symmetric_eigen()?;
    let lambda_min_a = eigs.first().copied().unwrap_or(0.0);
    let lambda_max_a = eigs.last().copied().unwrap_or(0.0);
    let tol = 1e-10 * lambda_max_a.abs().max(f64::MIN_POSITIVE);
    let nullity_a = eigs.iter().filter(|v| v.abs() <= tol).count();
    let a_spsd = lambda_min_a >= -tol;
    let a_spd = a_spsd && nullity_a == 0;

    let sigma_min_b = if s.n_t() == 0 {
        0.0
    } else {
        s.b().to_dense().singular_values()?.last().copied().unwrap_or(0.0)
    };
    let b_full_rank = s.n_t() == 0 || sigma_min_b > 0.0 && s.b().to_dense().rank()? == s.n_t();
    let rank_saddle = s.to_dense().rank()?;
    let saddle_nonsingular = rank_saddle == s.n_u() + s.n_t();

    let a_part = if a_spd {
        "A SPD".to_owned()
    } else if a_spsd {
        format!("A singular, nullity {nullity_a}")
    } else {
        format!("A indefinite (lambda_min {lambda_min_a:e})")
    };
    let b_part = if b_full_rank {
        "B full rank"
    } else {
        "B rank deficient"
    };
    let summary = format!(
        "{a_part}, {b_part}, saddle {}",
        if saddle_nonsingular {
            "nonsingular"
        } else {
            "singular"
        }
    );
    Ok(SystemReport {
        n_u: s.n_u(),
        n_t: s.n_t(),
        symmetry_defect: s.a().symmetry_defect(),
        lambda_min_a,
        lambda_max_a,
        nullity_a,
        sigma_min_b,
        rank_saddle,
        a_spsd,
        a_spd,
        b_full_rank,
        saddle_nonsingular,
        summary,
    })
}
