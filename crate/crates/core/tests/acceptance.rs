//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails.

use std::collections::BTreeSet;
use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use racp::augmentation::{
    compute_c, form_primal_schur, Augmentation, CRecipe, DenseAugmentation,
};
use racp::inner::InnerKind;
use racp::krylov::{solve_saddle, GmresConfig};
use racp::operator::to_dense;
use racp::partition::{assign_multipliers, comm_volume, partition_rows, RowPartition};
use racp::precond::{McpPreconditioner, RacpPreconditioner, RacpVariant, SchurApprox};
use racp::problem::{
    generate_floating_side, generate_fracture_cube, generate_random_spd_saddle, verify_system,
    Face, GridParams,
};
use racp::spectral::{
    bound_quantities, check_bounds, check_ideal, ideal_spectrum, preconditioned_spectrum,
    SpectrumVariant, CONTAIN_SLACK,
};
use racp::{DenseMatrix, Error, LinearOperator, SaddleSystem, SparseMatrix};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

const INNERS: [InnerKind; 3] = [InnerKind::ExactFactor, InnerKind::Jacobi, InnerKind::Ic0];

fn ideal_battery() -> Vec<SaddleSystem> {
    (0..50)
        .map(|s| generate_random_spd_saddle(60, 12, s).expect("battery instance"))
        .collect()
}

fn bound_battery() -> Vec<SaddleSystem> {
    (0..100u64)
        .map(|s| {
            let n_u = 20 + (s as usize % 21);
            let n_t = 4 + (s as usize % 7);
            generate_random_spd_saddle(n_u, n_t, 1000 + s).expect("bound instance")
        })
        .collect()
}

fn non_unitary(eigs: &[Complex64], n_t: usize) -> Vec<f64> {
    let mut by_dist: Vec<_> = eigs.to_vec();
    by_dist.sort_by(|a, b| (a - 1.0).norm().total_cmp(&(b - 1.0).norm()));
    let mut v: Vec<f64> = by_dist[by_dist.len() - n_t..].iter().map(|e| e.re).collect();
    v.sort_by(f64::total_cmp);
    v
}

fn criterion_1_2(battery: &[SaddleSystem]) -> (Outcome, Outcome) {
    let t0 = Instant::now();
    let mut hats = Vec::new();
    let mut fails1 = 0;
    for s in battery {
        let e = ideal_spectrum(s, true).expect("ideal hat spectrum");
        if !check_ideal(&e, s.n_u(), s.n_t(), true).all_contained {
            fails1 += 1;
        }
        hats.push(e);
    }
    let secs = t0.elapsed().as_secs_f64();
    let c1 = outcome(
        fails1 == 0 && secs < 10.0,
        format!("{} of 50 two-point spectra {{1 x60, 0.5 x12}} within 1e-8, {secs:.2} s", 50 - fails1),
    );

    let mut fails2 = 0;
    let mut worst_pair: f64 = 0.0;
    for (s, hat) in battery.iter().zip(&hats) {
        let bar = ideal_spectrum(s, false).expect("ideal bar spectrum");
        if !check_ideal(&bar, s.n_u(), s.n_t(), false).all_contained {
            fails2 += 1;
        }
        let h = non_unitary(hat, s.n_t());
        let mut b: Vec<f64> = non_unitary(&bar, s.n_t()).iter().map(|v| -v).collect();
        b.sort_by(f64::total_cmp);
        for (p, q) in h.iter().zip(&b) {
            worst_pair = worst_pair.max((p - q).abs());
        }
    }
    let c2 = outcome(
        fails2 == 0 && worst_pair <= 1e-8,
        format!(
            "{} of 50 spectra {{1 x60, -0.5 x12}}; max pairwise |λ̂ + λ̄| = {worst_pair:.2e}",
            50 - fails2
        ),
    );
    (c1, c2)
}

fn criterion_3_4_5(battery: &[SaddleSystem]) -> (Outcome, Outcome, Outcome) {
    let mut t_m = 0.0;
    let mut m_fail = 0;
    let mut m_runs = 0;
    let mut skipped = 0;
    let mut nocomplex_cases = 0;
    let mut nonpositive_re = 0;
    let mut ma_fail = 0;
    let mut ma_runs = 0;
    let mut ma_max_imag_ratio: f64 = 0.0;
    let mut l1_worst: f64 = 0.0;
    let mut l1_upper_fail = 0;
    for s in battery {
        for recipe in [CRecipe::LocalSolve, CRecipe::NormRatio] {
            let c: Augmentation = match compute_c(recipe, s.a(), s.b(), 1.0) {
                Ok(c) => c.into(),
                Err(Error::SingularLocalBlock { .. }) => continue,
                Err(e) => panic!("augmentation: {e}"),
            };
            for inner in INNERS {
                let t0 = Instant::now();
                let p = RacpPreconditioner::build(s, RacpVariant::M, c.clone(), inner)
                    .expect("RACP M");
                let q = bound_quantities(s, &c, p.inner()).expect("bound quantities");
                let eigs = preconditioned_spectrum(s, &p).expect("M spectrum");
                let rep = check_bounds(&eigs, &q, SpectrumVariant::M).expect("M check");
                t_m += t0.elapsed().as_secs_f64();
                m_runs += 1;
                if !rep.all_contained {
                    m_fail += 1;
                }
                skipped += usize::from(rep.lower_branch_skipped);
                nocomplex_cases += usize::from(rep.no_complex_expected);
                nonpositive_re += eigs.iter().filter(|e| e.re <= 0.0).count();

                if inner == InnerKind::ExactFactor {
                    let target = 1.0 + q.beta_t * q.beta_t;
                    l1_worst = l1_worst
                        .max((q.alpha_u - 1.0).abs())
                        .max((q.beta_u - target).abs());
                    let slack = CONTAIN_SLACK * (1.0 + target);
                    if eigs.iter().any(|e| e.re > target + slack) {
                        l1_upper_fail += 1;
                    }
                }

                let pa = RacpPreconditioner::build(s, RacpVariant::Ma, c.clone(), inner)
                    .expect("RACP Ma");
                let eigs = preconditioned_spectrum(s, &pa).expect("Ma spectrum");
                let rep = check_bounds(&eigs, &q, SpectrumVariant::Ma).expect("Ma check");
                ma_runs += 1;
                if !rep.all_contained {
                    ma_fail += 1;
                }
                ma_max_imag_ratio = ma_max_imag_ratio.max(rep.max_abs_imag / rep.spectral_radius);
            }
        }
    }
    let c3 = outcome(
        m_fail == 0 && nonpositive_re == 0 && t_m < 120.0,
        format!(
            "{}/{m_runs} M spectra contained ({nocomplex_cases} with 2β_t<α_u, {skipped} lower-branch skips), \
             {nonpositive_re} eigenvalues with Re<=0, {t_m:.1} s",
            m_runs - m_fail
        ),
    );
    let c4 = outcome(
        ma_fail == 0,
        format!(
            "{}/{ma_runs} Ma spectra real and contained, max |Im|/ρ = {ma_max_imag_ratio:.2e}",
            ma_runs - ma_fail
        ),
    );
    let c5 = outcome(
        l1_worst <= 1e-10 && l1_upper_fail == 0,
        format!(
            "exact inner: max(|α_u-1|, |β_u-(1+β_t²)|) = {l1_worst:.2e}, {l1_upper_fail} spectra above 1+β_t²"
        ),
    );
    (c3, c4, c5)
}

fn criterion_6(battery: &[SaddleSystem]) -> Outcome {
    let mut worst = 0;
    let mut unconverged = 0;
    for s in battery {
        let c = DenseAugmentation::ideal(s.a(), s.b()).expect("ideal C");
        let p = RacpPreconditioner::build(s, RacpVariant::M, c.into(), InnerKind::ExactFactor)
            .expect("ideal RACP");
        let (_, h) = solve_saddle(s, &p, &GmresConfig::default()).expect("gmres");
        worst = worst.max(h.iterations);
        unconverged += usize::from(!h.converged);
    }
    outcome(
        unconverged == 0 && worst <= 3,
        format!("max GMRES iterations with ideal RACP = {worst}, unconverged = {unconverged}"),
    )
}

fn criterion_7() -> Outcome {
    let p = GridParams {
        dirichlet_faces: vec![Face::XMin],
        ..GridParams::default()
    };
    let s = generate_floating_side(&p).expect("floating side");
    let nullity = verify_system(&s).expect("verify").nullity_a;
    let c = compute_c(CRecipe::NormRatio, s.a(), s.b(), 1.0).expect("norm ratio C");
    let racp = RacpPreconditioner::build(&s, RacpVariant::M, c.into(), InnerKind::ExactFactor)
        .expect("RACP on singular A");
    let (_, h) = solve_saddle(&s, &racp, &GmresConfig::default()).expect("gmres");
    let mcp = McpPreconditioner::build(&s, InnerKind::ExactFactor, SchurApprox::DiagA);
    let mcp_fails = matches!(mcp, Err(Error::SingularLeadingBlock(_)));
    outcome(
        nullity == 6 && h.converged && h.iterations <= 1000 && mcp_fails,
        format!(
            "nullity(A) = {nullity}; RACP converged = {} in {} its; MCP singular-block failure = {mcp_fails}",
            h.converged, h.iterations
        ),
    )
}

fn iterations(s: &SaddleSystem, variant: RacpVariant, omega: f64, inner: InnerKind) -> usize {
    let c = compute_c(CRecipe::NormRatio, s.a(), s.b(), omega).expect("C");
    let p = RacpPreconditioner::build(s, variant, c.into(), inner).expect("RACP");
    let (_, h) = solve_saddle(s, &p, &GmresConfig::default()).expect("gmres");
    assert!(h.converged, "trend runs must converge");
    h.iterations
}

fn criterion_8() -> Outcome {
    let s = generate_fracture_cube(&GridParams::cube(4)).expect("cube 4");
    let n: Vec<usize> = [1.0, 10.0, 100.0]
        .iter()
        .map(|&w| iterations(&s, RacpVariant::M, w, InnerKind::Ic0))
        .collect();
    outcome(
        n[2] > n[0] && n[1] >= n[0],
        format!("ic0 inner, 4x4x4: n_it(ω=1,10,100) = {n:?}"),
    )
}

fn criterion_9() -> Outcome {
    let params = [
        GridParams::cube(4),
        GridParams {
            distortion: 0.3,
            ..GridParams::cube(4)
        },
        GridParams::cube(5),
    ];
    let mut pairs = Vec::new();
    for p in &params {
        let s = generate_fracture_cube(p).expect("fracture cube");
        pairs.push((
            iterations(&s, RacpVariant::M, 1.0, InnerKind::Ic0),
            iterations(&s, RacpVariant::Ma, 1.0, InnerKind::Ic0),
        ));
    }
    outcome(
        pairs.iter().all(|(m, ma)| m <= ma),
        format!("ic0 inner, (n_it(M), n_it(Ma)) = {pairs:?}"),
    )
}

fn pattern(m: &SparseMatrix) -> BTreeSet<(usize, usize)> {
    (0..m.n_rows())
        .flat_map(|i| m.row_cols(i).iter().map(move |&j| (i, j)))
        .collect()
}

fn bbt_pattern(b: &SparseMatrix) -> BTreeSet<(usize, usize)> {
    let cols = b.transpose();
    let mut out = BTreeSet::new();
    for k in 0..cols.n_rows() {
        let rows = cols.row_cols(k);
        for &i in rows {
            for &j in rows {
                out.insert((i, j));
            }
        }
    }
    out
}

fn generated_systems() -> Vec<(String, SaddleSystem)> {
    let mut out = Vec::new();
    for n in [2, 3, 4] {
        for d in [0.0, 0.3] {
            let p = GridParams {
                distortion: d,
                ..GridParams::cube(n)
            };
            out.push((format!("fracture {n}^3 d={d}"), generate_fracture_cube(&p).unwrap()));
        }
    }
    for n in [2, 3] {
        let p = GridParams {
            dirichlet_faces: vec![Face::XMin],
            ..GridParams::cube(n)
        };
        out.push((format!("floating {n}^3"), generate_floating_side(&p).unwrap()));
    }
    for seed in 0..5 {
        out.push((
            format!("random seed {seed}"),
            generate_random_spd_saddle(40, 8, seed).unwrap(),
        ));
    }
    out
}

fn criterion_10() -> Outcome {
    let mut bad = Vec::new();
    let mut count = 0;
    for (name, s) in generated_systems() {
        for recipe in [CRecipe::NormRatio, CRecipe::GlobalGamma] {
            count += 1;
            let c = compute_c(recipe, s.a(), s.b(), 1.0).unwrap();
            let su = form_primal_schur(s.a(), s.b(), &c).unwrap().s_u;
            let expected: BTreeSet<_> = pattern(s.a()).union(&bbt_pattern(s.b())).copied().collect();
            let (ea, _) = s.a().to_dense().symmetric_eigen().unwrap();
            let (es, _) = su.to_dense().symmetric_eigen().unwrap();
            let tol = 1e-10 * es[es.len() - 1];
            let ok = pattern(&su) == expected
                && su.is_symmetric()
                && es[0] > tol
                && es[0] >= ea[0] - tol;
            if !ok {
                bad.push(format!("{name}/{recipe:?}"));
            }
        }
    }
    outcome(
        bad.is_empty(),
        format!("{}/{count} (system, C) pairs with exact pattern and SPD S_u {bad:?}", count - bad.len()),
    )
}

fn block(nu: usize, nt: usize, tl: &DenseMatrix, tr: &DenseMatrix, bl: &DenseMatrix, br: &DenseMatrix) -> DenseMatrix {
    let mut m = DenseMatrix::zeros(nu + nt, nu + nt);
    m.set_block(0, 0, tl);
    m.set_block(0, nu, tr);
    m.set_block(nu, 0, bl);
    m.set_block(nu, nu, br);
    m
}

fn racp_oracle(s: &SaddleSystem, c: &[f64], sinv: &DenseMatrix, variant: RacpVariant) -> DenseMatrix {
    let (nu, nt) = (s.n_u(), s.n_t());
    let sign = if variant == RacpVariant::M { 1.0 } else { -1.0 };
    let cinv = DenseMatrix::from_diagonal(&c.iter().map(|v| 1.0 / v).collect::<Vec<_>>());
    let b = s.b().to_dense();
    let (iu, it) = (DenseMatrix::identity(nu), DenseMatrix::identity(nt));
    let z_ut = DenseMatrix::zeros(nu, nt);
    let z_tu = DenseMatrix::zeros(nt, nu);
    let u_inv = block(nu, nt, &iu, &b.matmul(&cinv).unwrap().scale(sign), &z_tu, &it);
    let d_inv = block(nu, nt, sinv, &z_ut, &z_tu, &cinv.scale(-sign));
    let l_inv = block(nu, nt, &iu, &z_ut, &cinv.matmul(&b.transpose()).unwrap(), &it);
    l_inv.matmul(&d_inv).unwrap().matmul(&u_inv).unwrap()
}

fn mcp_oracle(s: &SaddleSystem, ainv: &DenseMatrix, schur: &DenseMatrix) -> DenseMatrix {
    let (nu, nt) = (s.n_u(), s.n_t());
    let b = s.b().to_dense();
    let sinv = schur.inverse().unwrap();
    let (iu, it) = (DenseMatrix::identity(nu), DenseMatrix::identity(nt));
    let z_ut = DenseMatrix::zeros(nu, nt);
    let z_tu = DenseMatrix::zeros(nt, nu);
    let l_inv = block(nu, nt, &iu, &z_ut, &b.transpose().matmul(ainv).unwrap().scale(-1.0), &it);
    let d_inv = block(nu, nt, ainv, &z_ut, &z_tu, &sinv);
    let u_inv = block(nu, nt, &iu, &ainv.matmul(&b).unwrap().scale(-1.0), &z_tu, &it);
    u_inv.matmul(&d_inv).unwrap().matmul(&l_inv).unwrap()
}

fn probe_error(op: &dyn LinearOperator, dense: &DenseMatrix, rng: &mut ChaCha8Rng) -> f64 {
    let n = op.dim();
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let got = op.apply_vec(&v);
        let want = dense.matvec(&v);
        let num: f64 = got.iter().zip(&want).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let den: f64 = want.iter().map(|a| a * a).sum::<f64>().sqrt();
        worst = worst.max(num / den);
    }
    worst
}

fn criterion_11() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst: f64 = 0.0;
    let mut checks = 0;
    let mut systems: Vec<SaddleSystem> = vec![
        generate_random_spd_saddle(60, 12, 7).unwrap(),
        generate_random_spd_saddle(150, 40, 8).unwrap(),
        generate_fracture_cube(&GridParams::default()).unwrap(),
        generate_fracture_cube(&GridParams {
            distortion: 0.3,
            ..GridParams::cube(3)
        })
        .unwrap(),
    ];
    systems.push(
        generate_floating_side(&GridParams {
            dirichlet_faces: vec![Face::XMin],
            ..GridParams::default()
        })
        .unwrap(),
    );
    for s in &systems {
        assert!(s.n_u() + s.n_t() <= 200);
        let c = compute_c(CRecipe::NormRatio, s.a(), s.b(), 1.0).unwrap();
        for inner in INNERS {
            for variant in [RacpVariant::M, RacpVariant::Ma] {
                let p = RacpPreconditioner::build(s, variant, c.clone().into(), inner).unwrap();
                let sinv = to_dense(p.inner());
                let dense = racp_oracle(s, c.entries(), &sinv, variant);
                worst = worst.max(probe_error(&p, &dense, &mut rng));
                checks += 1;
            }
            match McpPreconditioner::build(s, inner, SchurApprox::DiagA) {
                Ok(m) => {
                    let ainv = to_dense(m.inner_a());
                    let dense = mcp_oracle(s, &ainv, &m.schur_dense().unwrap());
                    worst = worst.max(probe_error(&m, &dense, &mut rng));
                    checks += 1;
                }
                Err(Error::SingularLeadingBlock(_)) => {}
                Err(e) => panic!("MCP build: {e}"),
            }
        }
    }
    outcome(
        worst <= 1e-12,
        format!("{checks} operator/oracle pairs x 20 probes, max relative error {worst:.2e}"),
    )
}

fn brute_force_exchanged(b: &SparseMatrix, rp: &RowPartition, owner: &[usize]) -> usize {
    let mut total = 0;
    for dest in 0..rp.n_procs {
        for j in 0..b.n_rows() {
            if rp.owner_of_row[j] == dest {
                continue;
            }
            let needed = b
                .row_cols(j)
                .iter()
                .any(|&l| owner[l] == dest);
            total += usize::from(needed);
        }
    }
    total
}

fn criterion_12() -> Outcome {
    let mut problems = Vec::new();
    let mut cases = 0;
    // generated contact systems
    for n in [2, 3, 4] {
        let s = generate_fracture_cube(&GridParams::cube(n)).unwrap();
        for p in 1..=4 {
            cases += 1;
            let rp = partition_rows(s.a(), p).unwrap();
            let ma = assign_multipliers(s.b(), &rp).unwrap();
            if ma != assign_multipliers(s.b(), &rp).unwrap() {
                problems.push(format!("nondeterministic cube {n} p={p}"));
            }
            let cols = s.b().column_patterns();
            let valid = cols
                .iter()
                .enumerate()
                .all(|(l, rows)| rows.iter().any(|&j| rp.owner_of_row[j] == ma.owner_of_mult[l]));
            if !valid || ma.counts.iter().sum::<usize>() != s.n_t() {
                problems.push(format!("invalid cube {n} p={p}"));
            }
            let cv = comm_volume(s.b(), &rp, &ma).unwrap();
            if cv.rows_exchanged != brute_force_exchanged(s.b(), &rp, &ma.owner_of_mult) {
                problems.push(format!("comm mismatch cube {n} p={p}"));
            }
        }
    }
    // random all-candidates instances up to 500 multipliers
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for (n_rows, n_procs, n_t) in [(40, 4, 100), (120, 6, 500), (60, 5, 333), (30, 3, 7)] {
        cases += 1;
        let a = SparseMatrix::identity(n_rows);
        let rp = partition_rows(&a, n_procs).unwrap();
        let mut trip = Vec::new();
        for l in 0..n_t {
            for p in 0..n_procs {
                let rows: Vec<usize> = (0..n_rows).filter(|&j| rp.owner_of_row[j] == p).collect();
                let j = rows[rng.gen_range(0..rows.len())];
                trip.push((j, l, rng.gen_range(0.5..1.5)));
            }
            let extra = rng.gen_range(0..n_rows);
            trip.push((extra, l, 1.0));
        }
        let b = SparseMatrix::from_triplets(n_rows, n_t, &trip).unwrap();
        let ma = assign_multipliers(&b, &rp).unwrap();
        let spread = ma.counts.iter().max().unwrap() - ma.counts.iter().min().unwrap();
        if spread > 1 {
            problems.push(format!("spread {spread} on n_t={n_t}"));
        }
        let cv = comm_volume(&b, &rp, &ma).unwrap();
        if cv.rows_exchanged != brute_force_exchanged(&b, &rp, &ma.owner_of_mult) {
            problems.push(format!("comm mismatch n_t={n_t}"));
        }
    }
    outcome(
        problems.is_empty(),
        format!("{cases} layouts checked {problems:?}"),
    )
}

fn main() {
    let ideal = ideal_battery();
    let bounds = bound_battery();
    let (c1, c2) = criterion_1_2(&ideal);
    let (c3, c4, c5) = criterion_3_4_5(&bounds);
    let results = [
        ("ideal augmented spectrum is {1, 0.5}", c1),
        ("mirrored ideal spectrum is {1, -0.5}", c2),
        ("M spectrum inside the eigenvalue bounds", c3),
        ("Ma spectrum real and inside the interval union", c4),
        ("exact inner limit values", c5),
        ("ideal RACP GMRES in at most 3 iterations", criterion_6(&ideal)),
        ("singular A: RACP converges, MCP fails", criterion_7()),
        ("omega trend", criterion_8()),
        ("M versus Ma iteration trend", criterion_9()),
        ("primal Schur complement pattern and definiteness", criterion_10()),
        ("sparse applies match dense factor products", criterion_11()),
        ("multiplier partition properties", criterion_12()),
    ];
    let mut failed = 0;
    for (i, (name, o)) in results.iter().enumerate() {
        let tag = if o.pass { "PASS" } else { "FAIL" };
        println!("criterion {:>2} [{tag}] {name}: {}", i + 1, o.detail);
        failed += usize::from(!o.pass);
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
