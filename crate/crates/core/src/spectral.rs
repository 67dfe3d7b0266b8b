//! Dense eigenvalue checks of the preconditioned operators.
//!
//! Bound quantities, with `Ŝ` the SPD matrix whose inverse the inner solver
//! applies and `X = Ŝ^{-1/2} B C^{-1/2}`:
//!
//! * `α_u, β_u`: extreme eigenvalues of `Ŝ^{-1/2}(A + 2 B C⁻¹ Bᵀ)Ŝ^{-1/2}`
//! * `α_t, β_t`: extreme singular values of `X`
//! * `α_a, β_a`: extreme eigenvalues of `Ŝ^{-1/2} A Ŝ^{-1/2}`
//!
//! For `M`, real eigenvalues lie in
//! `[min{α_u, 2α_t²/(β_u + √(β_u² − 4α_t²))}, β_u]` and complex ones in
//! `α_u/2 ≤ Re λ ≤ β_u/2`, `|Im λ| ≤ √(β_t² − α_u²/4)`; there are none when
//! `2β_t < α_u`. For `Mₐ` all eigenvalues are real and lie in
//! `[(α_a − √(α_a² + 4β_t²))/2, (β_a − √(β_a² + 4α_t²))/2] ∪ [α_a, (β_a + √(β_a² + 4β_t²))/2]`.

use num_complex::Complex64;
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::augmentation::{Augmentation, DenseAugmentation};
use crate::dense::{dense_cap, dense_eigensolve_capped, DenseMatrix};
use crate::error::{Error, Result};
use crate::inner::InnerSolver;
use crate::operator::LinearOperator;
use crate::problem::SaddleSystem;

/// `|Im λ| ≤ REAL_TOL·(1 + |λ|)` counts as real.
pub const REAL_TOL: f64 = 1e-10;
/// Containment slack `CONTAIN_SLACK·(1 + |bound|)`.
pub const CONTAIN_SLACK: f64 = 1e-8;
/// Realness requirement for `Mₐ`: `|Im λ| ≤ MA_IMAG_TOL·max|λ|`.
pub const MA_IMAG_TOL: f64 = 1e-8;
/// Cluster tolerance for the ideal spectra.
pub const CLUSTER_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum SpectrumVariant {
    M,
    Ma,
    IdealHat,
    IdealBar,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct BoundQuantities {
    pub alpha_u: f64,
    pub beta_u: f64,
    pub alpha_t: f64,
    pub beta_t: f64,
    pub alpha_a: f64,
    pub beta_a: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct Eig {
    pub re: f64,
    pub im: f64,
}

impl From<Complex64> for Eig {
    fn from(c: Complex64) -> Self {
        Eig { re: c.re, im: c.im }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct SpectralReport {
    pub variant: SpectrumVariant,
    pub eigenvalues: Vec<Eig>,
    pub bounds: Option<BoundQuantities>,
    pub containment: Vec<bool>,
    pub all_contained: bool,
    pub n_complex: usize,
    pub max_abs_imag: f64,
    pub spectral_radius: f64,
    /// `M`: the `2α_t²/(β_u+√(β_u²−4α_t²))` branch was undefined, so the
    /// real lower bound was not checked.
    pub lower_branch_skipped: bool,
    /// `M`: `2β_t < α_u` held, so complex eigenvalues count as violations.
    pub no_complex_expected: bool,
    /// `Mₐ`: `α_a ≈ 0` (singular `A`), the left interval degenerates.
    pub alpha_a_degenerate: bool,
    /// Ideal variants: counts near each cluster point, then unassigned.
    pub cluster_counts: Option<Vec<usize>>,
}

impl SpectralReport {
    /// CSV with header `re,im`.
    pub fn eigenvalues_csv(&self) -> String {
        let mut s = String::from("re,im\n");
        for e in &self.eigenvalues {
            s.push_str(&format!("{:e},{:e}\n", e.re, e.im));
        }
        s
    }
}

fn check_dense_size(n: usize) -> Result<()> {
    let cap = dense_cap();
    if n > cap {
        return Err(Error::SizeCapExceeded { size: n, cap });
    }
    Ok(())
}

/// Eigenvalues of `P 𝒜`, where `precond` applies `P`, by dense assembly.
pub fn preconditioned_spectrum(
    system: &SaddleSystem,
    precond: &dyn LinearOperator,
) -> Result<Vec<Complex64>> {
    let n = system.dim();
    check_dense_size(n)?;
    if precond.dim() != n {
        return Err(Error::DimensionMismatch {
            op: "preconditioned_spectrum",
            expected: n,
            got: precond.dim(),
        });
    }
    let k = system.to_dense();
    let mut pk = DenseMatrix::zeros(n, n);
    for j in 0..n {
        pk.set_column(j, &precond.apply_vec(&k.column(j)));
    }
    dense_eigensolve_capped(&pk, false, dense_cap())
}

/// `[[A, B], [Bᵀ, −C]]` for `hat`, `[[A, B], [−Bᵀ, C]]` otherwise.
pub fn augmented_dense(system: &SaddleSystem, c: &DenseMatrix, hat: bool) -> DenseMatrix {
    let (nu, nt) = (system.n_u(), system.n_t());
    let mut m = DenseMatrix::zeros(nu + nt, nu + nt);
    m.set_block(0, 0, &system.a().to_dense());
    m.set_block(0, nu, &system.b().to_dense());
    let bt = system.bt().to_dense();
    if hat {
        m.set_block(nu, 0, &bt);
        m.set_block(nu, nu, &c.scale(-1.0));
    } else {
        m.set_block(nu, 0, &bt.scale(-1.0));
        m.set_block(nu, nu, c);
    }
    m
}

/// Spectrum of `Â⁻¹𝒜` (`hat`) or `Ā⁻¹𝒜` with the ideal `C = Bᵀ A⁻¹ B`,
/// from dense solves. `A` must be nonsingular.
pub fn ideal_spectrum(system: &SaddleSystem, hat: bool) -> Result<Vec<Complex64>> {
    check_dense_size(system.dim())?;
    let c = DenseAugmentation::ideal(system.a(), system.b())?;
    let aug = augmented_dense(system, c.matrix(), hat);
    let op = aug.solve(&system.to_dense())?;
    dense_eigensolve_capped(&op, false, dense_cap())
}

/// Counts eigenvalues within `tol` of each target (nearest target wins);
/// the extra last entry counts the unassigned ones.
pub fn count_clusters(eigs: &[Complex64], targets: &[f64], tol: f64) -> Vec<usize> {
    let mut counts = vec![0; targets.len() + 1];
    for e in eigs {
        let (best, dist) = targets
            .iter()
            .enumerate()
            .map(|(i, &t)| (i, (e - Complex64::new(t, 0.0)).norm()))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("targets non-empty");
        if dist <= tol {
            counts[best] += 1;
        } else {
            counts[targets.len()] += 1;
        }
    }
    counts
}

/// `M^{-1/2}` of an SPD matrix by full eigendecomposition.
pub fn inv_sqrt_spd(m: &DenseMatrix) -> Result<DenseMatrix> {
    let (vals, vecs) = m.symmetric_eigen()?;
    if let Some(i) = vals.iter().position(|&v| !(v > 0.0)) {
        return Err(Error::FactorizationBreakdown {
            index: i,
            pivot: vals[i],
            context: "inverse square root of a non-SPD matrix",
        });
    }
    let d: Vec<f64> = vals.iter().map(|v| 1.0 / v.sqrt()).collect();
    let scaled = vecs.matmul(&DenseMatrix::from_diagonal(&d))?;
    symmetrize(&scaled.matmul(&vecs.transpose())?)
}

fn symmetrize(m: &DenseMatrix) -> Result<DenseMatrix> {
    Ok(m.add(&m.transpose()).scale(0.5))
}

fn extreme_eigs(m: &DenseMatrix) -> Result<(f64, f64)> {
    let (vals, _) = symmetrize(m)?.symmetric_eigen()?;
    Ok((vals[0], vals[vals.len() - 1]))
}

pub fn bound_quantities(
    system: &SaddleSystem,
    c: &Augmentation,
    inner: &InnerSolver,
) -> Result<BoundQuantities> {
    check_dense_size(system.n_u())?;
    let shat = inner.spd_form()?;
    let s_half = inv_sqrt_spd(&shat)?;
    let a = system.a().to_dense();
    let b = system.b().to_dense();
    let c_half = inv_sqrt_spd(&c.to_dense())?;
    let x = s_half.matmul(&b)?.matmul(&c_half)?;
    let xxt = x.matmul(&x.transpose())?;
    let sas = s_half.matmul(&a)?.matmul(&s_half)?;
    let (alpha_a, beta_a) = extreme_eigs(&sas)?;
    let (alpha_u, beta_u) = extreme_eigs(&sas.add(&xxt.scale(2.0)))?;
    let sv = x.singular_values()?;
    Ok(BoundQuantities {
        alpha_u,
        beta_u,
        alpha_t: sv.last().copied().unwrap_or(0.0),
        beta_t: sv.first().copied().unwrap_or(0.0),
        alpha_a,
        beta_a,
    })
}

fn within(x: f64, lo: f64, hi: f64) -> bool {
    x >= lo - CONTAIN_SLACK * (1.0 + lo.abs()) && x <= hi + CONTAIN_SLACK * (1.0 + hi.abs())
}

fn base_report(variant: SpectrumVariant, eigs: &[Complex64]) -> SpectralReport {
    let n_complex = eigs
        .iter()
        .filter(|e| e.im.abs() > REAL_TOL * (1.0 + e.norm()))
        .count();
    SpectralReport {
        variant,
        eigenvalues: eigs.iter().map(|&e| e.into()).collect(),
        bounds: None,
        containment: Vec::new(),
        all_contained: false,
        n_complex,
        max_abs_imag: eigs.iter().map(|e| e.im.abs()).fold(0.0, f64::max),
        spectral_radius: eigs.iter().map(|e| e.norm()).fold(0.0, f64::max),
        lower_branch_skipped: false,
        no_complex_expected: false,
        alpha_a_degenerate: false,
        cluster_counts: None,
    }
}

/// Eigenvalue region of `M⁻¹𝒜`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct MRegion {
    /// `None` when `β_u² < 4α_t²`.
    pub real_lower: Option<f64>,
    pub real_upper: f64,
    pub complex_re_lower: f64,
    pub complex_re_upper: f64,
    pub complex_im_max: f64,
    pub no_complex: bool,
}

/// Eigenvalue region of `Mₐ⁻¹𝒜`: two real intervals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct MaRegion {
    pub negative: (f64, f64),
    pub positive: (f64, f64),
}

impl BoundQuantities {
    pub fn m_region(&self) -> MRegion {
        let disc = self.beta_u * self.beta_u - 4.0 * self.alpha_t * self.alpha_t;
        let real_lower = (disc >= 0.0).then(|| {
            self.alpha_u
                .min(2.0 * self.alpha_t * self.alpha_t / (self.beta_u + disc.sqrt()))
        });
        MRegion {
            real_lower,
            real_upper: self.beta_u,
            complex_re_lower: self.alpha_u / 2.0,
            complex_re_upper: self.beta_u / 2.0,
            complex_im_max: (self.beta_t * self.beta_t - self.alpha_u * self.alpha_u / 4.0)
                .max(0.0)
                .sqrt(),
            no_complex: 2.0 * self.beta_t < self.alpha_u,
        }
    }

    pub fn ma_region(&self) -> MaRegion {
        let (aa, ba, at, bt) = (self.alpha_a, self.beta_a, self.alpha_t, self.beta_t);
        MaRegion {
            negative: (
                (aa - (aa * aa + 4.0 * bt * bt).sqrt()) / 2.0,
                (ba - (ba * ba + 4.0 * at * at).sqrt()) / 2.0,
            ),
            positive: (aa, (ba + (ba * ba + 4.0 * bt * bt).sqrt()) / 2.0),
        }
    }

    /// Named scalar bounds for plotting, region edges included.
    pub fn lines(&self, variant: SpectrumVariant) -> Vec<(&'static str, f64)> {
        let mut out = vec![
            ("alpha_u", self.alpha_u),
            ("beta_u", self.beta_u),
            ("alpha_t", self.alpha_t),
            ("beta_t", self.beta_t),
            ("alpha_a", self.alpha_a),
            ("beta_a", self.beta_a),
        ];
        match variant {
            SpectrumVariant::M => {
                let r = self.m_region();
                if let Some(l) = r.real_lower {
                    out.push(("real_lower", l));
                }
                out.extend([
                    ("real_upper", r.real_upper),
                    ("complex_re_lower", r.complex_re_lower),
                    ("complex_re_upper", r.complex_re_upper),
                    ("complex_im_max", r.complex_im_max),
                ]);
            }
            SpectrumVariant::Ma => {
                let r = self.ma_region();
                out.extend([
                    ("negative_lower", r.negative.0),
                    ("negative_upper", r.negative.1),
                    ("positive_lower", r.positive.0),
                    ("positive_upper", r.positive.1),
                ]);
            }
            SpectrumVariant::IdealHat | SpectrumVariant::IdealBar => {}
        }
        out
    }
}

/// Checks the eigenvalue containment for `M` or `Mₐ`.
pub fn check_bounds(
    eigs: &[Complex64],
    q: &BoundQuantities,
    variant: SpectrumVariant,
) -> Result<SpectralReport> {
    let mut rep = base_report(variant, eigs);
    rep.bounds = Some(*q);
    match variant {
        SpectrumVariant::M => {
            let r = q.m_region();
            rep.lower_branch_skipped = r.real_lower.is_none();
            rep.no_complex_expected = r.no_complex;
            rep.containment = eigs
                .iter()
                .map(|e| {
                    if e.im.abs() <= REAL_TOL * (1.0 + e.norm()) {
                        within(e.re, r.real_lower.unwrap_or(f64::NEG_INFINITY), r.real_upper)
                    } else {
                        !r.no_complex
                            && within(e.re, r.complex_re_lower, r.complex_re_upper)
                            && within(e.im.abs(), 0.0, r.complex_im_max)
                    }
                })
                .collect();
        }
        SpectrumVariant::Ma => {
            rep.alpha_a_degenerate = q.alpha_a.abs() <= 1e-10 * q.beta_a.abs().max(1.0);
            let MaRegion { negative, positive } = q.ma_region();
            let imag_tol = MA_IMAG_TOL * rep.spectral_radius;
            rep.containment = eigs
                .iter()
                .map(|e| {
                    e.im.abs() <= imag_tol
                        && (within(e.re, negative.0, negative.1)
                            || within(e.re, positive.0, positive.1))
                })
                .collect();
        }
        SpectrumVariant::IdealHat | SpectrumVariant::IdealBar => {
            return Err(Error::InvalidParameter(
                "ideal spectra are checked with check_ideal".into(),
            ))
        }
    }
    rep.all_contained = rep.containment.iter().all(|&c| c);
    Ok(rep)
}

/// Checks an ideal spectrum against `{1 ×n_u, ±0.5 ×n_t}`.
pub fn check_ideal(eigs: &[Complex64], n_u: usize, n_t: usize, hat: bool) -> SpectralReport {
    let (variant, other) = if hat {
        (SpectrumVariant::IdealHat, 0.5)
    } else {
        (SpectrumVariant::IdealBar, -0.5)
    };
    let mut rep = base_report(variant, eigs);
    rep.containment = eigs
        .iter()
        .map(|e| {
            (e - Complex64::new(1.0, 0.0)).norm() <= CLUSTER_TOL
                || (e - Complex64::new(other, 0.0)).norm() <= CLUSTER_TOL
        })
        .collect();
    let counts = count_clusters(eigs, &[1.0, other], CLUSTER_TOL);
    rep.all_contained = counts == vec![n_u, n_t, 0];
    rep.cluster_counts = Some(counts);
    rep
}
