use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use racp::augmentation::CRecipe;
use racp::inner::InnerKind;
use racp::krylov::GmresConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "kebab-case")]
pub enum GenKind {
    FractureCube,
    FloatingSide,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "kebab-case")]
pub enum PrecondKind {
    RacpM,
    RacpMa,
    Mcp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "kebab-case")]
pub enum RecipeArg {
    Local,
    Norm,
    Global,
}

impl From<RecipeArg> for CRecipe {
    fn from(r: RecipeArg) -> Self {
        match r {
            RecipeArg::Local => CRecipe::LocalSolve,
            RecipeArg::Norm => CRecipe::NormRatio,
            RecipeArg::Global => CRecipe::GlobalGamma,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "kebab-case")]
pub enum InnerArg {
    Exact,
    Jacobi,
    Ic0,
}

impl From<InnerArg> for InnerKind {
    fn from(i: InnerArg) -> Self {
        match i {
            InnerArg::Exact => InnerKind::ExactFactor,
            InnerArg::Jacobi => InnerKind::Jacobi,
            InnerArg::Ic0 => InnerKind::Ic0,
        }
    }
}

pub fn value_name<T: ValueEnum>(v: &T) -> String {
    v.to_possible_value()
        .map(|p| p.get_name().to_owned())
        .unwrap_or_default()
}

/// Values read from `--config`; flags override them.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub a: Option<PathBuf>,
    pub b: Option<PathBuf>,
    pub gen: Option<GenKind>,
    pub nx: Option<usize>,
    pub ny: Option<usize>,
    pub nz: Option<usize>,
    pub e: Option<f64>,
    pub nu: Option<f64>,
    pub distortion: Option<f64>,
    pub n_u: Option<usize>,
    pub n_t: Option<usize>,
    pub seed: Option<u64>,
    pub precond: Option<PrecondKind>,
    pub c_recipe: Option<RecipeArg>,
    pub omega: Option<f64>,
    pub inner: Option<InnerArg>,
    pub restart: Option<usize>,
    pub tol: Option<f64>,
    pub maxit: Option<usize>,
    pub out: Option<PathBuf>,
}

impl FileConfig {
    pub fn load(path: Option<&PathBuf>) -> Result<Self> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .with_context(|| format!("reading config {}", p.display()))?;
                serde_json::from_str(&text)
                    .with_context(|| format!("parsing config {}", p.display()))
            }
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct SystemArgs {
    /// Matrix Market file with A.
    #[arg(long, requires = "b", conflicts_with = "gen")]
    pub a: Option<PathBuf>,
    /// Matrix Market file with B.
    #[arg(long, requires = "a")]
    pub b: Option<PathBuf>,
    /// Built-in generator.
    #[arg(long, value_enum)]
    pub gen: Option<GenKind>,
    #[arg(long)]
    pub nx: Option<usize>,
    #[arg(long)]
    pub ny: Option<usize>,
    #[arg(long)]
    pub nz: Option<usize>,
    /// Young's modulus.
    #[arg(long)]
    pub e: Option<f64>,
    /// Poisson ratio.
    #[arg(long)]
    pub nu: Option<f64>,
    #[arg(long)]
    pub distortion: Option<f64>,
    /// Displacement unknowns (random generator).
    #[arg(long)]
    pub n_u: Option<usize>,
    /// Multipliers (random generator).
    #[arg(long)]
    pub n_t: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// JSON file with defaults for any of the flags.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct PrecondArgs {
    #[arg(long, value_enum)]
    pub precond: Option<PrecondKind>,
    #[arg(long, value_enum)]
    pub c_recipe: Option<RecipeArg>,
    #[arg(long)]
    pub omega: Option<f64>,
    #[arg(long, value_enum)]
    pub inner: Option<InnerArg>,
}

#[derive(Debug, Clone, Args)]
pub struct GmresArgs {
    #[arg(long)]
    pub restart: Option<usize>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub maxit: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum SystemSource {
    Files {
        a: PathBuf,
        b: PathBuf,
    },
    Generator {
        gen: GenKind,
        nx: usize,
        ny: usize,
        nz: usize,
        e: f64,
        nu: f64,
        distortion: f64,
        n_u: usize,
        n_t: usize,
        seed: u64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct PrecondSpec {
    pub precond: PrecondKind,
    pub c_recipe: RecipeArg,
    pub omega: f64,
    pub inner: InnerArg,
}

impl PrecondSpec {
    pub fn label(&self) -> String {
        match self.precond {
            PrecondKind::Mcp => format!("mcp/{}", value_name(&self.inner)),
            p => format!(
                "{}/{}/omega={}/{}",
                value_name(&p),
                value_name(&self.c_recipe),
                self.omega,
                value_name(&self.inner)
            ),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega > 0.0 && self.omega.is_finite()) {
            bail!("omega must be positive, got {}", self.omega);
        }
        Ok(())
    }

    /// Parses `PRECOND[:RECIPE[:OMEGA[:INNER]]]`, filling gaps from `base`.
    pub fn parse(s: &str, base: &PrecondSpec) -> Result<Self> {
        let mut parts = s.split(':');
        let mut spec = *base;
        if let Some(p) = parts.next() {
            spec.precond = PrecondKind::from_str(p, true).map_err(anyhow::Error::msg)?;
        }
        if let Some(r) = parts.next().filter(|r| !r.is_empty()) {
            spec.c_recipe = RecipeArg::from_str(r, true).map_err(anyhow::Error::msg)?;
        }
        if let Some(w) = parts.next().filter(|w| !w.is_empty()) {
            spec.omega = w.parse().with_context(|| format!("bad omega in spec {s:?}"))?;
        }
        if let Some(i) = parts.next().filter(|i| !i.is_empty()) {
            spec.inner = InnerArg::from_str(i, true).map_err(anyhow::Error::msg)?;
        }
        if parts.next().is_some() {
            bail!("too many fields in spec {s:?}");
        }
        spec.validate()?;
        Ok(spec)
    }
}

/// Fully resolved settings: flags, then config file, then defaults.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub source: SystemSource,
    pub precond: PrecondSpec,
    pub gmres: GmresConfig,
    pub out: PathBuf,
}

pub fn resolve(
    sys: &SystemArgs,
    pre: Option<&PrecondArgs>,
    gm: Option<&GmresArgs>,
) -> Result<Resolved> {
    let f = FileConfig::load(sys.config.as_ref())?;
    let a = sys.a.clone().or(if sys.gen.is_some() { None } else { f.a.clone() });
    let b = sys.b.clone().or(if sys.gen.is_some() { None } else { f.b.clone() });
    let gen = sys.gen.or(if sys.a.is_some() { None } else { f.gen });
    let source = match (a, b, gen) {
        (Some(_), _, Some(_)) => bail!("--a/--b and --gen are mutually exclusive"),
        (Some(a), Some(b), None) => SystemSource::Files { a, b },
        (Some(_), None, None) | (None, Some(_), None) => bail!("--a and --b must be given together"),
        (None, _, gen) => {
            let gen = gen.unwrap_or(GenKind::FractureCube);
            let nx = sys.nx.or(f.nx).unwrap_or(2);
            SystemSource::Generator {
                gen,
                nx,
                ny: sys.ny.or(f.ny).unwrap_or(nx),
                nz: sys.nz.or(f.nz).unwrap_or(nx),
                e: sys.e.or(f.e).unwrap_or(1.0),
                nu: sys.nu.or(f.nu).unwrap_or(0.25),
                distortion: sys.distortion.or(f.distortion).unwrap_or(0.0),
                n_u: sys.n_u.or(f.n_u).unwrap_or(60),
                n_t: sys.n_t.or(f.n_t).unwrap_or(12),
                seed: sys.seed.or(f.seed).unwrap_or(0),
            }
        }
    };
    let precond = PrecondSpec {
        precond: pre.and_then(|p| p.precond).or(f.precond).unwrap_or(PrecondKind::RacpM),
        c_recipe: pre.and_then(|p| p.c_recipe).or(f.c_recipe).unwrap_or(RecipeArg::Norm),
        omega: pre.and_then(|p| p.omega).or(f.omega).unwrap_or(1.0),
        inner: pre.and_then(|p| p.inner).or(f.inner).unwrap_or(InnerArg::Exact),
    };
    precond.validate()?;
    let d = GmresConfig::default();
    let gmres = GmresConfig {
        restart: gm.and_then(|g| g.restart).or(f.restart).unwrap_or(d.restart),
        rel_tol: gm.and_then(|g| g.tol).or(f.tol).unwrap_or(d.rel_tol),
        max_iters: gm.and_then(|g| g.maxit).or(f.maxit).unwrap_or(d.max_iters),
        record_history: true,
    };
    gmres.validate()?;
    let out = sys.out.clone().or(f.out).unwrap_or_else(|| PathBuf::from("racp-out"));
    Ok(Resolved {
        source,
        precond,
        gmres,
        out,
    })
}
