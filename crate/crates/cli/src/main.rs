use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};

mod args;
mod commands;
mod records;

use args::{resolve, GmresArgs, PrecondArgs, PrecondSpec, SystemArgs};
use commands::{IdealKind, Preset};

/// Sparse saddle-point toolkit: generators, RACP/MCP preconditioned GMRES,
/// spectra and simulated multiplier partitioning.
#[derive(Debug, Parser)]
#[command(name = "racp", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write A.mtx, B.mtx and meta.json for a generated system.
    Generate {
        #[command(flatten)]
        sys: SystemArgs,
    },
    /// Solve with preconditioned GMRES; writes result.json and history.csv.
    Solve {
        #[command(flatten)]
        sys: SystemArgs,
        #[command(flatten)]
        pre: PrecondArgs,
        #[command(flatten)]
        gmres: GmresArgs,
        /// Also compute the dense preconditioned spectrum.
        #[arg(long)]
        spectral: bool,
    },
    /// Dense spectrum with bound checks; writes spectrum.json and CSVs.
    Spectrum {
        #[command(flatten)]
        sys: SystemArgs,
        #[command(flatten)]
        pre: PrecondArgs,
        /// Spectrum of the ideal augmented inverse instead of RACP.
        #[arg(long, value_enum)]
        ideal: Option<IdealKind>,
    },
    /// Row partition and multiplier assignment; writes partition.json.
    Partition {
        #[command(flatten)]
        sys: SystemArgs,
        #[arg(long, default_value_t = 2)]
        procs: usize,
        /// Run the boundary refinement pass.
        #[arg(long)]
        refine: bool,
        /// Per-chunk concurrent assignment (differs from the sequential sweep).
        #[arg(long)]
        concurrent: bool,
    },
    /// Run several preconditioners on one system; writes compare.json/csv.
    Compare {
        #[command(flatten)]
        sys: SystemArgs,
        #[command(flatten)]
        pre: PrecondArgs,
        #[command(flatten)]
        gmres: GmresArgs,
        #[arg(long, value_enum)]
        preset: Option<Preset>,
        /// PRECOND[:RECIPE[:OMEGA[:INNER]]], repeatable.
        #[arg(long = "spec")]
        specs: Vec<String>,
    },
    /// Write the JSON schemas of every output record.
    Schema {
        #[arg(long, default_value = "schema")]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate { sys } => {
            let r = resolve(&sys, None, None)?;
            let meta = commands::generate(&r.source, &r.out)?;
            println!("{}: {}", r.out.display(), meta.report.summary);
        }
        Command::Solve {
            sys,
            pre,
            gmres,
            spectral,
        } => {
            let r = resolve(&sys, Some(&pre), Some(&gmres))?;
            let rec = commands::solve(&r.source, &r.precond, &r.gmres, &r.out, spectral)?;
            match &rec.failure_reason {
                None => println!("{}: converged in {} iterations", rec.label, rec.n_it),
                Some(why) => println!("{}: not converged ({why})", rec.label),
            }
        }
        Command::Spectrum { sys, pre, ideal } => {
            let r = resolve(&sys, Some(&pre), None)?;
            let rec = commands::spectrum(&r.source, &r.precond, ideal, &r.out)?;
            println!(
                "{} eigenvalues, all contained: {}",
                rec.report.eigenvalues.len(),
                rec.report.all_contained
            );
        }
        Command::Partition {
            sys,
            procs,
            refine,
            concurrent,
        } => {
            let r = resolve(&sys, None, None)?;
            let rec = commands::partition(&r.source, procs, refine, concurrent, &r.out)?;
            println!(
                "multipliers per process {:?}, rows exchanged {}",
                rec.assignment.counts, rec.comm.rows_exchanged
            );
        }
        Command::Compare {
            sys,
            pre,
            gmres,
            preset,
            specs,
        } => {
            let r = resolve(&sys, Some(&pre), Some(&gmres))?;
            let extra = specs
                .iter()
                .map(|s| PrecondSpec::parse(s, &r.precond))
                .collect::<Result<Vec<_>>>()?;
            let rec = commands::compare(&r.source, &r.precond, preset, &extra, &r.gmres, &r.out)?;
            for row in &rec.rows {
                match &row.failure_reason {
                    None => println!("{}: {}", row.label, row.n_it),
                    Some(why) => println!("{}: failed ({why})", row.label),
                }
            }
            for t in &rec.trends {
                println!("{} {}: {}", if t.holds { "holds" } else { "violated" }, t.name, t.detail);
            }
        }
        Command::Schema { out } => {
            for name in commands::schema(&out)? {
                println!("{}", out.join(name).display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
