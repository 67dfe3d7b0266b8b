use std::fs;
use std::path::Path;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use serde::Serialize;

use racp::augmentation::{compute_c, Augmentation};
use racp::inner::InnerKind;
use racp::krylov::{solve_saddle, GmresConfig};
use racp::mtx::{read_matrix_market, write_matrix_market};
use racp::partition::{
    assign_multipliers, assign_multipliers_concurrent, comm_volume, edge_cut, partition_rows,
    refine_partition,
};
use racp::precond::{
    cost_model, McpPreconditioner, Preconditioner, RacpPreconditioner, RacpVariant, SchurApprox,
};
use racp::problem::{
    generate_fracture_cube, generate_floating_side, generate_random_spd_saddle, verify_system,
    Axis, Face, FracturePlane, GridParams, SystemLabels,
};
use racp::spectral::{
    bound_quantities, check_bounds, check_ideal, ideal_spectrum, preconditioned_spectrum,
    SpectrumVariant, REAL_TOL,
};
use racp::{Error, SaddleSystem};

use crate::args::{value_name, GenKind, PrecondKind, PrecondSpec, RecipeArg, SystemSource};
use crate::records::*;

pub fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<()> {
    let path = dir.join(name);
    let text = serde_json::to_string_pretty(value)?;
    fs::write(&path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

fn write_text(dir: &Path, name: &str, text: &str) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

pub fn load_system(source: &SystemSource) -> Result<SaddleSystem> {
    match source {
        SystemSource::Files { a, b } => {
            let am = read_matrix_market(a).with_context(|| format!("reading {}", a.display()))?;
            let bm = read_matrix_market(b).with_context(|| format!("reading {}", b.display()))?;
            let mut labels = SystemLabels::named("matrix_market");
            labels.params = serde_json::json!({ "a": a, "b": b });
            Ok(SaddleSystem::new(am, bm, labels)?)
        }
        SystemSource::Generator {
            gen: GenKind::Random,
            n_u,
            n_t,
            seed,
            ..
        } => Ok(generate_random_spd_saddle(*n_u, *n_t, *seed)?),
        SystemSource::Generator {
            gen,
            nx,
            ny,
            nz,
            e,
            nu,
            distortion,
            ..
        } => {
            let dirichlet_faces = match gen {
                GenKind::FloatingSide => vec![Face::XMin],
                _ => vec![Face::XMin, Face::XMax],
            };
            let p = GridParams {
                nx: *nx,
                ny: *ny,
                nz: *nz,
                young_modulus: *e,
                poisson_ratio: *nu,
                fracture: Some(FracturePlane {
                    axis: Axis::X,
                    index: nx / 2,
                }),
                dirichlet_faces,
                distortion: *distortion,
            };
            Ok(match gen {
                GenKind::FloatingSide => generate_floating_side(&p)?,
                _ => generate_fracture_cube(&p)?,
            })
        }
    }
}

pub fn generate(source: &SystemSource, out: &Path) -> Result<MetaRecord> {
    let system = load_system(source)?;
    let report = verify_system(&system)?;
    ensure_dir(out)?;
    write_matrix_market(system.a(), out.join("A.mtx"))?;
    write_matrix_market(system.b(), out.join("B.mtx"))?;
    let meta = MetaRecord {
        schema_version: SCHEMA_VERSION,
        system: SystemMeta::of(&system, source),
        nullity_a: report.nullity_a,
        report,
        a_file: "A.mtx".into(),
        b_file: "B.mtx".into(),
    };
    write_json(out, "meta.json", &meta)?;
    Ok(meta)
}

fn racp_variant(kind: PrecondKind) -> Option<RacpVariant> {
    match kind {
        PrecondKind::RacpM => Some(RacpVariant::M),
        PrecondKind::RacpMa => Some(RacpVariant::Ma),
        PrecondKind::Mcp => None,
    }
}

fn build_racp(system: &SaddleSystem, spec: &PrecondSpec, v: RacpVariant) -> racp::Result<RacpPreconditioner> {
    let c = compute_c(spec.c_recipe.into(), system.a(), system.b(), spec.omega)?;
    RacpPreconditioner::build(system, v, Augmentation::Diagonal(c), spec.inner.into())
}

pub fn build_precond(
    system: &SaddleSystem,
    spec: &PrecondSpec,
) -> racp::Result<Box<dyn Preconditioner>> {
    Ok(match racp_variant(spec.precond) {
        Some(v) => Box::new(build_racp(system, spec, v)?),
        None => Box::new(McpPreconditioner::build(
            system,
            InnerKind::from(spec.inner),
            SchurApprox::DiagA,
        )?),
    })
}

fn failure_reason(e: &Error) -> String {
    match e {
        Error::SingularLeadingBlock(_) => LEADING_BLOCK_SINGULAR.into(),
        Error::SingularLocalBlock { .. } => "local block singular".into(),
        Error::FactorizationBreakdown { .. } => "factorization breakdown".into(),
        _ => "preconditioner construction failed".into(),
    }
}

fn spectral_summary(
    system: &SaddleSystem,
    spec: &PrecondSpec,
    p: &dyn Preconditioner,
) -> Result<SpectralSummary> {
    let eigs = preconditioned_spectrum(system, p)?;
    match racp_variant(spec.precond) {
        Some(v) => {
            let r = build_racp(system, spec, v)?;
            let q = bound_quantities(system, r.c(), r.inner())?;
            Ok(SpectralSummary::from(&check_bounds(&eigs, &q, spectrum_variant(v))?))
        }
        None => Ok(SpectralSummary {
            n_eigenvalues: eigs.len(),
            n_complex: eigs.iter().filter(|e| e.im.abs() > REAL_TOL * (1.0 + e.norm())).count(),
            max_abs_imag: eigs.iter().map(|e| e.im.abs()).fold(0.0, f64::max),
            spectral_radius: eigs.iter().map(|e| e.norm()).fold(0.0, f64::max),
            all_contained: None,
        }),
    }
}

fn spectrum_variant(v: RacpVariant) -> SpectrumVariant {
    match v {
        RacpVariant::M => SpectrumVariant::M,
        RacpVariant::Ma => SpectrumVariant::Ma,
    }
}

/// Builds the preconditioner and runs GMRES. A failed build becomes a
/// record with `converged = false`; the history is returned as CSV text.
pub fn solve_one(
    system: &SaddleSystem,
    meta: &SystemMeta,
    spec: &PrecondSpec,
    gmres: &GmresConfig,
    history_name: &str,
    spectral: bool,
) -> Result<(ResultRecord, Option<String>)> {
    let mut rec = ResultRecord::pending(meta, spec, gmres);
    let t0 = Instant::now();
    let p = match build_precond(system, spec) {
        Ok(p) => p,
        Err(e) => {
            rec.failure_reason = Some(failure_reason(&e));
            rec.failure_detail = Some(e.to_string());
            rec.wall_time_s = t0.elapsed().as_secs_f64();
            return Ok((rec, None));
        }
    };
    let (_, hist) = solve_saddle(system, p.as_ref(), gmres)?;
    rec.wall_time_s = t0.elapsed().as_secs_f64();
    let cm = cost_model(p.as_ref(), system);
    rec.converged = hist.converged;
    rec.n_it = hist.iterations;
    rec.restarts = hist.restarts;
    rec.c_app = Some(cm.c_app);
    rec.c_s = Some(hist.solve_cost_cs);
    rec.flops_per_apply = Some(cm.flops);
    rec.final_relative_residual = Some(hist.final_relative_residual());
    rec.history_csv = Some(history_name.to_owned());
    if !hist.converged {
        rec.failure_reason = Some("max iterations reached".into());
    }
    if spectral {
        rec.spectral = Some(spectral_summary(system, spec, p.as_ref())?);
    }
    Ok((rec, Some(hist.to_csv())))
}

pub fn solve(
    source: &SystemSource,
    spec: &PrecondSpec,
    gmres: &GmresConfig,
    out: &Path,
    spectral: bool,
) -> Result<ResultRecord> {
    let system = load_system(source)?;
    let meta = SystemMeta::of(&system, source);
    let (rec, csv) = solve_one(&system, &meta, spec, gmres, "history.csv", spectral)?;
    ensure_dir(out)?;
    if let Some(csv) = csv {
        write_text(out, "history.csv", &csv)?;
    }
    write_json(out, "result.json", &rec)?;
    Ok(rec)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum IdealKind {
    Hat,
    Bar,
}

pub fn spectrum(
    source: &SystemSource,
    spec: &PrecondSpec,
    ideal: Option<IdealKind>,
    out: &Path,
) -> Result<SpectrumRecord> {
    let system = load_system(source)?;
    let (report, pre, lines) = match ideal {
        Some(k) => {
            let hat = k == IdealKind::Hat;
            let eigs = ideal_spectrum(&system, hat)?;
            (check_ideal(&eigs, system.n_u(), system.n_t(), hat), None, Vec::new())
        }
        None => {
            let v = racp_variant(spec.precond)
                .context("spectrum supports racp-m and racp-ma, or --ideal")?;
            let p = build_racp(&system, spec, v)?;
            let eigs = preconditioned_spectrum(&system, &p)?;
            let q = bound_quantities(&system, p.c(), p.inner())?;
            let sv = spectrum_variant(v);
            let lines = q
                .lines(sv)
                .into_iter()
                .map(|(n, v)| BoundLine {
                    name: n.to_owned(),
                    value: v,
                })
                .collect();
            (check_bounds(&eigs, &q, sv)?, Some(*spec), lines)
        }
    };
    ensure_dir(out)?;
    write_text(out, "eigenvalues.csv", &report.eigenvalues_csv())?;
    let bounds_csv = if lines.is_empty() {
        None
    } else {
        let mut s = String::from("name,value\n");
        for l in &lines {
            s.push_str(&format!("{},{:e}\n", l.name, l.value));
        }
        write_text(out, "bounds.csv", &s)?;
        Some("bounds.csv".to_owned())
    };
    let rec = SpectrumRecord {
        schema_version: SCHEMA_VERSION,
        system: SystemMeta::of(&system, source),
        preconditioner: pre,
        report,
        bound_lines: lines,
        eigenvalues_csv: "eigenvalues.csv".into(),
        bounds_csv,
    };
    write_json(out, "spectrum.json", &rec)?;
    Ok(rec)
}

pub fn partition(
    source: &SystemSource,
    procs: usize,
    refine: bool,
    concurrent: bool,
    out: &Path,
) -> Result<PartitionRecord> {
    let system = load_system(source)?;
    let mut rp = partition_rows(system.a(), procs)?;
    if refine {
        rp = refine_partition(system.a(), &rp);
    }
    let ma = if concurrent {
        assign_multipliers_concurrent(system.b(), &rp)?
    } else {
        assign_multipliers(system.b(), &rp)?
    };
    let comm = comm_volume(system.b(), &rp, &ma)?;
    ensure_dir(out)?;
    write_text(out, "assignment.csv", &ma.to_csv())?;
    let rec = PartitionRecord {
        schema_version: SCHEMA_VERSION,
        system: SystemMeta::of(&system, source),
        rows_per_proc: rp.rows_per_proc(),
        edge_cut: edge_cut(system.a(), &rp.owner_of_row),
        partition: rp,
        assignment: ma,
        comm,
        assignment_csv: "assignment.csv".into(),
    };
    write_json(out, "partition.json", &rec)?;
    Ok(rec)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Preset {
    OmegaSweep,
    MVsMa,
    RacpVsMcp,
}

pub const OMEGA_SWEEP: [f64; 5] = [0.01, 0.1, 1.0, 10.0, 100.0];

fn preset_specs(preset: Preset, base: &PrecondSpec) -> Vec<PrecondSpec> {
    let racp = |precond| PrecondSpec {
        precond,
        ..*base
    };
    match preset {
        Preset::OmegaSweep => OMEGA_SWEEP
            .iter()
            .map(|&omega| PrecondSpec {
                precond: PrecondKind::RacpM,
                c_recipe: RecipeArg::Norm,
                omega,
                inner: base.inner,
            })
            .collect(),
        Preset::MVsMa => vec![racp(PrecondKind::RacpM), racp(PrecondKind::RacpMa)],
        Preset::RacpVsMcp => vec![racp(PrecondKind::RacpM), racp(PrecondKind::Mcp)],
    }
}

fn its(r: &ResultRecord) -> String {
    if r.converged {
        r.n_it.to_string()
    } else {
        "failed".into()
    }
}

fn preset_trends(preset: Preset, rows: &[ResultRecord]) -> Vec<TrendCheck> {
    let ok = |r: &ResultRecord| r.converged.then_some(r.n_it);
    match preset {
        Preset::OmegaSweep => {
            let (w1, w10, w100) = (&rows[2], &rows[3], &rows[4]);
            let detail = format!("n_it(1)={} n_it(10)={} n_it(100)={}", its(w1), its(w10), its(w100));
            vec![
                TrendCheck {
                    name: "n_it(100) > n_it(1)".into(),
                    holds: matches!((ok(w100), ok(w1)), (Some(a), Some(b)) if a > b),
                    detail: detail.clone(),
                },
                TrendCheck {
                    name: "n_it(10) >= n_it(1)".into(),
                    holds: matches!((ok(w10), ok(w1)), (Some(a), Some(b)) if a >= b),
                    detail,
                },
            ]
        }
        Preset::MVsMa => vec![TrendCheck {
            name: "n_it(M) <= n_it(Ma)".into(),
            holds: matches!((ok(&rows[0]), ok(&rows[1])), (Some(a), Some(b)) if a <= b),
            detail: format!("M={} Ma={}", its(&rows[0]), its(&rows[1])),
        }],
        Preset::RacpVsMcp => vec![TrendCheck {
            name: "racp converges".into(),
            holds: rows[0].converged,
            detail: format!(
                "racp={} mcp={}{}",
                its(&rows[0]),
                its(&rows[1]),
                rows[1]
                    .failure_reason
                    .as_deref()
                    .map(|r| format!(" ({r})"))
                    .unwrap_or_default()
            ),
        }],
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:e}")).unwrap_or_default()
}

fn table_csv(rows: &[ResultRecord]) -> String {
    let mut s = String::from(
        "index,label,precond,c_recipe,omega,inner,converged,n_it,c_app,c_s,final_relative_residual,failure_reason\n",
    );
    for (i, r) in rows.iter().enumerate() {
        let p = &r.preconditioner;
        s.push_str(&format!(
            "{i},{},{},{},{},{},{},{},{},{},{},{}\n",
            r.label,
            value_name(&p.precond),
            value_name(&p.c_recipe),
            p.omega,
            value_name(&p.inner),
            r.converged,
            r.n_it,
            fmt_opt(r.c_app),
            fmt_opt(r.c_s),
            fmt_opt(r.final_relative_residual),
            r.failure_reason.as_deref().unwrap_or(""),
        ));
    }
    s
}


pub fn compare(
    source: &SystemSource,
    base: &PrecondSpec,
    preset: Option<Preset>,
    extra: &[PrecondSpec],
    gmres: &GmresConfig,
    out: &Path,
) -> Result<CompareRecord> {
    let mut specs = preset.map(|p| preset_specs(p, base)).unwrap_or_default();
    let n_preset = specs.len();
    specs.extend_from_slice(extra);
    if specs.is_empty() {
        bail!("compare needs --preset or at least one --spec");
    }
    let system = load_system(source)?;
    let meta = SystemMeta::of(&system, source);
    ensure_dir(out)?;
    let mut rows = Vec::with_capacity(specs.len());
    for (i, spec) in specs.iter().enumerate() {
        let name = format!("history_{i}.csv");
        let (rec, csv) = match solve_one(&system, &meta, spec, gmres, &name, false) {
            Ok(x) => x,
            Err(e) => {
                // a failing spec is recorded and the run continues
                let mut rec = ResultRecord::pending(&meta, spec, gmres);
                rec.failure_reason = Some("solve failed".into());
                rec.failure_detail = Some(format!("{e:#}"));
                (rec, None)
            }
        };
        if let Some(csv) = csv {
            write_text(out, &name, &csv)?;
        }
        rows.push(rec);
    }
    let trends = preset
        .map(|p| preset_trends(p, &rows[..n_preset]))
        .unwrap_or_default();
    let csv = table_csv(&rows);
    write_text(out, "compare.csv", &csv)?;
    let rec = CompareRecord {
        schema_version: SCHEMA_VERSION,
        system: meta,
        preset: preset.map(|p| value_name(&p)),
        rows,
        trends,
        table_csv: "compare.csv".into(),
    };
    write_json(out, "compare.json", &rec)?;
    Ok(rec)
}


pub fn schema(out: &Path) -> Result<Vec<String>> {
    ensure_dir(out)?;
    let mut names = Vec::new();
    for (name, s) in schemas() {
        write_json(out, name, &s)?;
        names.push(name.to_owned());
    }
    Ok(names)
}

