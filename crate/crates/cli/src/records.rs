use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use racp::krylov::GmresConfig;
use racp::partition::{CommVolume, MultiplierAssignment, RowPartition};
use racp::problem::{SystemLabels, SystemReport};
use racp::spectral::SpectralReport;
use racp::SaddleSystem;

use crate::args::{PrecondSpec, SystemSource};

pub const SCHEMA_VERSION: u32 = 1;

/// Reason recorded when MCP hits a singular leading block.
pub const LEADING_BLOCK_SINGULAR: &str = "leading block singular";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct SystemMeta {
    pub source: SystemSource,
    pub labels: SystemLabels,
    pub n_u: usize,
    pub n_t: usize,
    pub nnz_a: usize,
    pub nnz_b: usize,
}

impl SystemMeta {
    pub fn of(system: &SaddleSystem, source: &SystemSource) -> Self {
        Self {
            source: source.clone(),
            labels: system.labels.clone(),
            n_u: system.n_u(),
            n_t: system.n_t(),
            nnz_a: system.a().nnz(),
            nnz_b: system.b().nnz(),
        }
    }
}

/// `meta.json`, written by `generate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct MetaRecord {
    pub schema_version: u32,
    pub system: SystemMeta,
    pub report: SystemReport,
    pub nullity_a: usize,
    pub a_file: String,
    pub b_file: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct SpectralSummary {
    pub n_eigenvalues: usize,
    pub n_complex: usize,
    pub max_abs_imag: f64,
    pub spectral_radius: f64,
    pub all_contained: Option<bool>,
}

impl From<&SpectralReport> for SpectralSummary {
    fn from(r: &SpectralReport) -> Self {
        Self {
            n_eigenvalues: r.eigenvalues.len(),
            n_complex: r.n_complex,
            max_abs_imag: r.max_abs_imag,
            spectral_radius: r.spectral_radius,
            all_contained: r.bounds.map(|_| r.all_contained),
        }
    }
}

/// One solve: `result.json`, and each row of a comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct ResultRecord {
    pub schema_version: u32,
    pub system: SystemMeta,
    pub preconditioner: PrecondSpec,
    pub label: String,
    pub gmres: GmresConfig,
    pub converged: bool,
    pub n_it: usize,
    pub restarts: usize,
    pub c_app: Option<f64>,
    pub c_s: Option<f64>,
    pub flops_per_apply: Option<u64>,
    pub final_relative_residual: Option<f64>,
    pub wall_time_s: f64,
    /// File name of the residual history, relative to the record.
    pub history_csv: Option<String>,
    pub failure_reason: Option<String>,
    pub failure_detail: Option<String>,
    pub spectral: Option<SpectralSummary>,
}

impl ResultRecord {
    /// Record for a run that has not produced results yet.
    pub fn pending(meta: &SystemMeta, spec: &PrecondSpec, gmres: &GmresConfig) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            system: meta.clone(),
            preconditioner: *spec,
            label: spec.label(),
            gmres: *gmres,
            converged: false,
            n_it: 0,
            restarts: 0,
            c_app: None,
            c_s: None,
            flops_per_apply: None,
            final_relative_residual: None,
            wall_time_s: 0.0,
            history_csv: None,
            failure_reason: None,
            failure_detail: None,
            spectral: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct BoundLine {
    pub name: String,
    pub value: f64,
}

/// `spectrum.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct SpectrumRecord {
    pub schema_version: u32,
    pub system: SystemMeta,
    pub preconditioner: Option<PrecondSpec>,
    pub report: SpectralReport,
    pub bound_lines: Vec<BoundLine>,
    pub eigenvalues_csv: String,
    pub bounds_csv: Option<String>,
}

/// `partition.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct PartitionRecord {
    pub schema_version: u32,
    pub system: SystemMeta,
    pub partition: RowPartition,
    pub rows_per_proc: Vec<usize>,
    pub edge_cut: usize,
    pub assignment: MultiplierAssignment,
    pub comm: CommVolume,
    pub assignment_csv: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct TrendCheck {
    pub name: String,
    pub holds: bool,
    pub detail: String,
}

/// `compare.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct CompareRecord {
    pub schema_version: u32,
    pub system: SystemMeta,
    pub preset: Option<String>,
    pub rows: Vec<ResultRecord>,
    pub trends: Vec<TrendCheck>,
    pub table_csv: String,
}

/// Published schemas, keyed by file name.
pub fn schemas() -> Vec<(&'static str, schemars::Schema)> {
    vec![
        ("meta.schema.json", schemars::schema_for!(MetaRecord)),
        ("result.schema.json", schemars::schema_for!(ResultRecord)),
        ("spectrum.schema.json", schemars::schema_for!(SpectrumRecord)),
        ("partition.schema.json", schemars::schema_for!(PartitionRecord)),
        ("compare.schema.json", schemars::schema_for!(CompareRecord)),
    ]
}
