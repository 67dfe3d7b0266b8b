use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

use racp::mtx::read_matrix_market;
use racp::problem::{verify_system, SystemLabels};
use racp::SaddleSystem;

fn racp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_racp"))
        .args(args)
        .output()
        .expect("spawn racp")
}

fn ok(args: &[&str]) -> Output {
    let o = racp(args);
    assert!(
        o.status.success(),
        "racp {args:?} failed:\n{}",
        String::from_utf8_lossy(&o.stderr)
    );
    o
}

fn read_json(p: impl AsRef<Path>) -> Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

fn schema_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("schema")
}

fn assert_valid(schema_file: &str, instance: &Value) {
    let schema = read_json(schema_dir().join(schema_file));
    let v = jsonschema::validator_for(&schema).unwrap();
    let errors: Vec<String> = v.iter_errors(instance).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "{schema_file}: {errors:?}");
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn generate_fracture_cube_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["generate", "--gen", "fracture-cube", "--nx", "2", "--out", s(dir.path())]);
    let a = read_matrix_market(dir.path().join("A.mtx")).unwrap();
    let b = read_matrix_market(dir.path().join("B.mtx")).unwrap();
    let sys = SaddleSystem::new(a, b, SystemLabels::named("reread")).unwrap();
    let rep = verify_system(&sys).unwrap();
    assert!(rep.a_spd && rep.b_full_rank && rep.saddle_nonsingular);

    let meta = read_json(dir.path().join("meta.json"));
    assert_valid("meta.schema.json", &meta);
    assert_eq!(meta["system"]["n_u"], sys.n_u());
    assert_eq!(meta["system"]["n_t"], sys.n_t());
    assert_eq!(meta["nullity_a"], 0);
}

#[test]
fn generate_floating_side_records_nullity() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["generate", "--gen", "floating-side", "--nx", "2", "--out", s(dir.path())]);
    let meta = read_json(dir.path().join("meta.json"));
    assert_eq!(meta["nullity_a"], 6);
    assert_eq!(meta["report"]["saddle_nonsingular"], true);
}

#[test]
fn invalid_poisson_ratio_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let o = racp(&["generate", "--nu", "0.6", "--out", s(dir.path())]);
    assert!(!o.status.success());
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.to_lowercase().contains("poisson"), "{err}");
}

#[test]
fn malformed_input_exits_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.mtx");
    fs::write(&bad, "not a matrix\n").unwrap();
    let out = dir.path().join("o");
    assert!(!racp(&["solve", "--a", s(&bad), "--b", s(&bad), "--out", s(&out)]).status.success());
    assert!(!racp(&["solve", "--a", s(&bad), "--gen", "random"]).status.success());
    assert!(!racp(&["solve", "--omega", "-1", "--out", s(&out)]).status.success());
    assert!(!racp(&["solve", "--precond", "nope"]).status.success());
}

#[test]
fn solve_fracture_cube_converges() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["solve", "--gen", "fracture-cube", "--nx", "2", "--out", s(dir.path())]);
    let rec = read_json(dir.path().join("result.json"));
    assert_valid("result.schema.json", &rec);
    assert_eq!(rec["converged"], true);
    assert!(rec["final_relative_residual"].as_f64().unwrap() <= 1e-8);
    let csv = fs::read_to_string(dir.path().join("history.csv")).unwrap();
    assert!(csv.starts_with("iter,relative_residual\n"));
    assert_eq!(csv.lines().count(), rec["n_it"].as_u64().unwrap() as usize + 2);
}

#[test]
fn solve_from_matrix_market_files() {
    let gen = tempfile::tempdir().unwrap();
    ok(&["generate", "--gen", "random", "--n-u", "30", "--n-t", "6", "--seed", "4", "--out", s(gen.path())]);
    let out = tempfile::tempdir().unwrap();
    let (a, b) = (gen.path().join("A.mtx"), gen.path().join("B.mtx"));
    ok(&["solve", "--a", s(&a), "--b", s(&b), "--precond", "racp-ma", "--out", s(out.path())]);
    let rec = read_json(out.path().join("result.json"));
    assert_eq!(rec["converged"], true);
    assert_eq!(rec["system"]["source"]["source"], "files");
}

#[test]
fn floating_side_mcp_is_a_structured_failure() {
    let dir = tempfile::tempdir().unwrap();
    let o = ok(&["solve", "--gen", "floating-side", "--precond", "mcp", "--out", s(dir.path())]);
    assert!(String::from_utf8_lossy(&o.stdout).contains("leading block singular"));
    let rec = read_json(dir.path().join("result.json"));
    assert_valid("result.schema.json", &rec);
    assert_eq!(rec["converged"], false);
    assert_eq!(rec["failure_reason"], "leading block singular");
    assert!(!dir.path().join("history.csv").exists());
}

#[test]
fn solve_is_deterministic_up_to_wall_time() {
    let runs: Vec<Value> = (0..2)
        .map(|_| {
            let dir = tempfile::tempdir().unwrap();
            ok(&["solve", "--gen", "random", "--seed", "11", "--inner", "ic0", "--out", s(dir.path())]);
            let mut v = read_json(dir.path().join("result.json"));
            v["wall_time_s"] = Value::Null;
            v
        })
        .collect();
    assert_eq!(runs[0], runs[1]);
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"gen": "random", "n_u": 20, "n_t": 4, "omega": 10.0, "tol": 1e-6}"#).unwrap();
    let out = dir.path().join("o");
    ok(&["solve", "--config", s(&cfg), "--omega", "2", "--out", s(&out)]);
    let rec = read_json(out.join("result.json"));
    assert_eq!(rec["preconditioner"]["omega"], 2.0);
    assert_eq!(rec["gmres"]["rel_tol"], 1e-6);
    assert_eq!(rec["gmres"]["restart"], 100);
    assert_eq!(rec["system"]["n_u"], 20);

    fs::write(&cfg, r#"{"bogus": 1}"#).unwrap();
    assert!(!racp(&["solve", "--config", s(&cfg)]).status.success());
}

#[test]
fn solve_with_spectral_summary() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["solve", "--gen", "random", "--n-u", "20", "--n-t", "4", "--spectral", "--out", s(dir.path())]);
    let rec = read_json(dir.path().join("result.json"));
    assert_valid("result.schema.json", &rec);
    assert_eq!(rec["spectral"]["n_eigenvalues"], 24);
    assert_eq!(rec["spectral"]["all_contained"], true);
}

fn eig_pairs(dir: &Path) -> Vec<(f64, f64)> {
    fs::read_to_string(dir.join("eigenvalues.csv"))
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| {
            let (a, b) = l.split_once(',').unwrap();
            (a.parse().unwrap(), b.parse().unwrap())
        })
        .collect()
}

#[test]
fn ideal_spectra_cluster_at_two_points() {
    for (kind, other) in [("hat", 0.5), ("bar", -0.5)] {
        let dir = tempfile::tempdir().unwrap();
        ok(&["spectrum", "--gen", "random", "--n-u", "16", "--n-t", "4", "--ideal", kind, "--out", s(dir.path())]);
        let rec = read_json(dir.path().join("spectrum.json"));
        assert_valid("spectrum.schema.json", &rec);
        assert_eq!(rec["report"]["all_contained"], true);
        let eigs = eig_pairs(dir.path());
        let ones = eigs.iter().filter(|e| (e.0 - 1.0).abs() < 1e-8 && e.1.abs() < 1e-8).count();
        let halves = eigs.iter().filter(|e| (e.0 - other).abs() < 1e-8 && e.1.abs() < 1e-8).count();
        assert_eq!((ones, halves), (16, 4), "{kind}");
        assert!(!dir.path().join("bounds.csv").exists());
    }
}

#[test]
fn jacobi_spectrum_reports_bound_lines() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["spectrum", "--gen", "fracture-cube", "--inner", "jacobi", "--out", s(dir.path())]);
    let rec = read_json(dir.path().join("spectrum.json"));
    assert_valid("spectrum.schema.json", &rec);
    assert_eq!(rec["report"]["all_contained"], true);
    let bounds = fs::read_to_string(dir.path().join("bounds.csv")).unwrap();
    assert!(bounds.starts_with("name,value\n"));
    assert!(bounds.contains("real_upper,"));
    let n = rec["system"]["n_u"].as_u64().unwrap() + rec["system"]["n_t"].as_u64().unwrap();
    assert_eq!(eig_pairs(dir.path()).len() as u64, n);
}

#[test]
fn spectrum_rejects_mcp_and_size_cap() {
    let dir = tempfile::tempdir().unwrap();
    assert!(!racp(&["spectrum", "--precond", "mcp", "--out", s(dir.path())]).status.success());
    let o = Command::new(env!("CARGO_BIN_EXE_racp"))
        .args(["spectrum", "--gen", "random", "--out", s(dir.path())])
        .env("RACP_DENSE_CAP", "10")
        .output()
        .unwrap();
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("cap"));
}

#[test]
fn partition_writes_assignment() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["partition", "--gen", "fracture-cube", "--nx", "4", "--procs", "3", "--refine", "--out", s(dir.path())]);
    let rec = read_json(dir.path().join("partition.json"));
    assert_valid("partition.schema.json", &rec);
    let csv = fs::read_to_string(dir.path().join("assignment.csv")).unwrap();
    let n_t = rec["system"]["n_t"].as_u64().unwrap() as usize;
    assert_eq!(csv.lines().count(), n_t + 1);
    let counts: u64 = rec["assignment"]["counts"].as_array().unwrap().iter().map(|c| c.as_u64().unwrap()).sum();
    assert_eq!(counts as usize, n_t);
    assert_eq!(rec["assignment"]["non_normative"], false);

    let conc = tempfile::tempdir().unwrap();
    ok(&["partition", "--gen", "fracture-cube", "--procs", "2", "--concurrent", "--out", s(conc.path())]);
    assert_eq!(read_json(conc.path().join("partition.json"))["assignment"]["non_normative"], true);
}

fn compare(args: &[&str]) -> Value {
    let dir = tempfile::tempdir().unwrap();
    let mut full = vec!["compare"];
    full.extend_from_slice(args);
    full.extend_from_slice(&["--out", s(dir.path())]);
    ok(&full);
    let rec = read_json(dir.path().join("compare.json"));
    assert_valid("compare.schema.json", &rec);
    let csv = fs::read_to_string(dir.path().join("compare.csv")).unwrap();
    assert_eq!(csv.lines().count(), rec["rows"].as_array().unwrap().len() + 1);
    rec
}

fn n_it(row: &Value) -> u64 {
    assert_eq!(row["converged"], true, "{row}");
    row["n_it"].as_u64().unwrap()
}

#[test]
fn compare_omega_sweep_deteriorates_above_one() {
    let rec = compare(&["--gen", "fracture-cube", "--nx", "4", "--inner", "ic0", "--preset", "omega-sweep"]);
    let rows = rec["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 5);
    assert!(n_it(&rows[4]) > n_it(&rows[2]));
    assert!(n_it(&rows[3]) >= n_it(&rows[2]));
    assert!(rec["trends"].as_array().unwrap().iter().all(|t| t["holds"] == true));
}

#[test]
fn compare_m_vs_ma() {
    let rec = compare(&["--gen", "fracture-cube", "--nx", "4", "--inner", "ic0", "--preset", "m-vs-ma"]);
    let rows = rec["rows"].as_array().unwrap();
    assert!(n_it(&rows[0]) <= n_it(&rows[1]));
}

#[test]
fn compare_racp_vs_mcp_on_floating_side() {
    let rec = compare(&["--gen", "floating-side", "--preset", "racp-vs-mcp", "--spec", "racp-ma:local"]);
    let rows = rec["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[0]["converged"], true);
    assert_eq!(rows[1]["converged"], false);
    assert_eq!(rows[1]["failure_reason"], "leading block singular");
    assert_eq!(rows[2]["preconditioner"]["c_recipe"], "local");
}

#[test]
fn published_schemas_are_current() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["schema", "--out", s(dir.path())]);
    let mut n = 0;
    for entry in fs::read_dir(dir.path()).unwrap() {
        let p = entry.unwrap().path();
        let name = p.file_name().unwrap();
        let published = schema_dir().join(name);
        assert_eq!(
            read_json(&p),
            read_json(&published),
            "{} is stale; regenerate with `racp schema --out crates/cli/schema`",
            published.display()
        );
        n += 1;
    }
    assert_eq!(n, 5);
}
