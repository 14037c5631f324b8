//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use cone_refine::cones::{
    d_project_apply, exp_case, project, project_dual, vec_to_mat, PrimitiveCone, ProjectionJacobian,
};
use cone_refine::embedding::{Embedding, DEFAULT_RECOVERY_TOL};
use cone_refine::linalg::{dot, norm2, sym_eig, LinearOperator};
use cone_refine::lsqr::{lsqr_solve, LsqrOptions};
use cone_refine::problems::{generate, perturb, SizeProfile};
use cone_refine::refine::RefinementConfig;
use cone_refine_cli::commands::{experiment_rows, geometric_mean, CSV_HEADER};
use cone_refine_cli::{ExperimentArgs, RefineFlags};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Criterion = (&'static str, fn() -> Verdict);

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn uniform(rng: &mut ChaCha8Rng, len: usize, r: f64) -> Vec<f64> {
    (0..len).map(|_| rng.random_range(-r..r)).collect()
}

fn derivative_cones() -> Vec<PrimitiveCone> {
    vec![
        PrimitiveCone::NonNeg(5),
        PrimitiveCone::SecondOrder(2),
        PrimitiveCone::SecondOrder(5),
        PrimitiveCone::SecondOrder(20),
        PrimitiveCone::PsdTriangle(2),
        PrimitiveCone::PsdTriangle(3),
        PrimitiveCone::PsdTriangle(5),
        PrimitiveCone::ExpPrimal,
        PrimitiveCone::ExpDual,
    ]
}

/// A point whose first coordinate is spread so that every case of the
/// projection formula is sampled.
fn sample_point(cone: PrimitiveCone, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut x = uniform(rng, cone.dim(), 3.0);
    if let PrimitiveCone::SecondOrder(d) = cone {
        if d > 1 {
            let tail = norm2(&x[1..]);
            x[0] = rng.random_range(-2.0..2.0) * tail;
        }
    }
    x
}

fn exp_far_from_boundaries(v: [f64; 3], margin: f64) -> bool {
    let case = exp_case(v);
    (0..27).all(|i| {
        let d = [
            (i % 3) as f64 - 1.0,
            ((i / 3) % 3) as f64 - 1.0,
            (i / 9) as f64 - 1.0,
        ];
        exp_case([
            v[0] + margin * d[0],
            v[1] + margin * d[1],
            v[2] + margin * d[2],
        ]) == case
    })
}

/// At least `margin` away from every place where the projection formula
/// changes.
fn differentiable(cone: PrimitiveCone, x: &[f64], margin: f64) -> bool {
    match cone {
        PrimitiveCone::Zero(_) | PrimitiveCone::Free(_) => true,
        PrimitiveCone::NonNeg(_) => x.iter().all(|v| v.abs() >= margin),
        PrimitiveCone::SecondOrder(_) => {
            if x.len() == 1 {
                return x[0].abs() >= margin;
            }
            let nx = norm2(&x[1..]);
            nx >= margin && (nx - x[0].abs()).abs() >= margin
        }
        PrimitiveCone::PsdTriangle(n) => {
            let eig = sym_eig(&vec_to_mat(n, x)).unwrap();
            eig.eigenvalues.iter().all(|l| l.abs() >= margin)
        }
        PrimitiveCone::ExpPrimal => exp_far_from_boundaries([x[0], x[1], x[2]], margin),
        PrimitiveCone::ExpDual => exp_far_from_boundaries([-x[0], -x[1], -x[2]], margin),
    }
}

fn criterion_1() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    let mut failures = 0;
    let mut total = 0;
    for cone in derivative_cones() {
        let mut accepted = 0;
        while accepted < 100 {
            let x = sample_point(cone, &mut rng);
            if !differentiable(cone, &x, 1e-3) {
                continue;
            }
            accepted += 1;
            let dir = uniform(&mut rng, cone.dim(), 1.0);
            let plus: Vec<f64> = x.iter().zip(&dir).map(|(a, b)| a + h * b).collect();
            let minus: Vec<f64> = x.iter().zip(&dir).map(|(a, b)| a - h * b).collect();
            let fd: Vec<f64> = project(cone, &plus)
                .unwrap()
                .iter()
                .zip(project(cone, &minus).unwrap())
                .map(|(a, b)| (a - b) / (2.0 * h))
                .collect();
            let jd = d_project_apply(cone, &x, &dir).unwrap();
            // relative to the derivative, or to the direction where the
            // derivative vanishes (polar region)
            let rel = norm2(&sub(&fd, &jd)) / norm2(&jd).max(1e-3 * norm2(&dir));
            worst = worst.max(rel);
            total += 1;
            if rel > 1e-5 {
                failures += 1;
            }
        }
    }
    verdict(
        failures == 0,
        format!(
            "{total} points over 9 cones, worst relative error {worst:.2e}, {failures} above 1e-5"
        ),
    )
}

fn moreau_cones() -> Vec<PrimitiveCone> {
    let mut c = vec![PrimitiveCone::Zero(3), PrimitiveCone::Free(3)];
    c.extend(derivative_cones());
    c
}

fn criterion_2() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for cone in moreau_cones() {
        for _ in 0..1000 {
            let x = sample_point(cone, &mut rng);
            let xx = dot(&x, &x).max(f64::MIN_POSITIVE);
            let p = project(cone, &x).unwrap();
            let q = sub(&p, &x);
            // x = P_K(x) + P_{-K*}(x), with P_{-K*}(x) = -P_{K*}(-x)
            let neg: Vec<f64> = x.iter().map(|v| -v).collect();
            let polar: Vec<f64> = project_dual(cone, &neg)
                .unwrap()
                .iter()
                .map(|v| -v)
                .collect();
            let recompose = norm2(&sub(&sub(&x, &p), &polar)) / xx.sqrt();
            let orth = dot(&p, &q).abs() / xx;
            // P(x) - x lies in K*, so x - P(x) lies in -K*
            let dual_gap = norm2(&sub(&project_dual(cone, &q).unwrap(), &q)) / xx.sqrt();
            let in_k = norm2(&sub(&project(cone, &p).unwrap(), &p)) / xx.sqrt();
            worst = worst.max(recompose).max(orth).max(dual_gap).max(in_k);
        }
    }
    verdict(
        worst <= 1e-9,
        format!("11 cones x 1000 points, worst scaled violation {worst:.2e}"),
    )
}

fn random_embedded_point(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    let mut z = uniform(rng, dim, 1.0);
    let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
    z[dim - 1] = sign * rng.random_range(0.2..1.0);
    z
}

fn criterion_3() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    for seed in 0..100 {
        let g = generate(seed, &SizeProfile::tiny(), None);
        let e = Embedding::new(&g.program).unwrap();
        let d = e.total_dim();
        let z = random_embedded_point(&mut rng, d);
        let u = uniform(&mut rng, d, 1.0);
        let v = uniform(&mut rng, d, 1.0);
        let scale = norm2(&u) * norm2(&v);
        let dp = ProjectionJacobian::new(e.cone_blocks(), &z).unwrap();
        let sym = (dot(&dp.forward(&u).unwrap(), &v) - dot(&u, &dp.forward(&v).unwrap())).abs();
        let dn = e.d_normalized_residual(&z).unwrap();
        let adj = (dot(&dn.forward(&u).unwrap(), &v) - dot(&u, &dn.adjoint(&v).unwrap())).abs();
        worst = worst.max(sym / scale).max(adj / scale);
    }
    verdict(
        worst <= 1e-10,
        format!("100 (z,u,v) triples, worst gap / (|u||v|) {worst:.2e}"),
    )
}

fn criterion_4() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut worst_r, mut worst_n): (f64, f64) = (0.0, 0.0);
    for seed in 0..100 {
        let g = generate(seed, &SizeProfile::tiny(), None);
        let e = Embedding::new(&g.program).unwrap();
        let z = random_embedded_point(&mut rng, e.total_dim());
        let r = e.residual(&z).unwrap();
        let n = e.normalized_residual(&z).unwrap();
        for alpha in [0.5, 2.0, 10.0] {
            let az: Vec<f64> = z.iter().map(|v| alpha * v).collect();
            let ar: Vec<f64> = r.iter().map(|v| alpha * v).collect();
            let dr = norm2(&sub(&e.residual(&az).unwrap(), &ar)) / (alpha * norm2(&z));
            let dn = norm2(&sub(&e.normalized_residual(&az).unwrap(), &n));
            worst_r = worst_r.max(dr);
            worst_n = worst_n.max(dn);
        }
    }
    verdict(
        worst_r <= 1e-12 && worst_n <= 1e-12,
        format!("100 points x 3 scalings, worst |R(az)-aR(z)|/(a|z|) {worst_r:.2e}, |N(az)-N(z)| {worst_n:.2e}"),
    )
}

fn criterion_5() -> Verdict {
    let mut worst: f64 = 0.0;
    let mut kinds = [0usize; 3];
    for seed in 0..300 {
        let g = generate(seed, &SizeProfile::tiny(), None);
        kinds[g.kind as usize] += 1;
        let e = Embedding::new(&g.program).unwrap();
        let z = e.embed_solution(&g.witness).unwrap();
        let n = norm2(&e.normalized_residual(&z).unwrap());
        worst = worst.max(n / norm2(&z).max(1.0));
    }
    verdict(
        worst <= 1e-9,
        format!(
            "300 instances (feasible/infeasible/unbounded = {}/{}/{}), worst |N|/max(1,|z|) {worst:.2e}",
            kinds[0], kinds[1], kinds[2]
        ),
    )
}

fn criterion_6() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let lambda: f64 = 1e-8;
    let mut worst: f64 = 0.0;
    let mut max_iters = 0;
    for _ in 0..20 {
        let a = DMatrix::from_fn(50, 30, |_, _| rng.random_range(-1.0..1.0));
        let b = uniform(&mut rng, 50, 1.0);
        let opts = LsqrOptions {
            max_iters: 200,
            damping: lambda.sqrt(),
            ..Default::default()
        };
        let r = lsqr_solve(&a, &b, &opts).unwrap();
        max_iters = max_iters.max(r.iterations_used);
        let lhs = a.transpose() * &a + DMatrix::identity(30, 30) * lambda;
        let rhs = a.transpose() * DVector::from_column_slice(&b);
        let exact = lhs.cholesky().unwrap().solve(&rhs);
        let diff = (DVector::from_column_slice(&r.solution) - &exact).norm() / exact.norm();
        worst = worst.max(diff);
    }
    verdict(
        worst <= 1e-8 && max_iters <= 200,
        format!(
            "20 systems 50x30, worst relative error {worst:.2e}, at most {max_iters} iterations"
        ),
    )
}

fn criterion_7() -> Verdict {
    let cfg = RefinementConfig::default();
    let (mut tested, mut descent) = (0, 0);
    for seed in 0..200 {
        let g = generate(seed, &SizeProfile::tiny(), None);
        let e = Embedding::new(&g.program).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7000 + seed);
        let z = perturb(&e.embed_solution(&g.witness).unwrap(), 1e-3, &mut rng);
        let n = e.normalized_residual(&z).unwrap();
        let dn = e.d_normalized_residual(&z).unwrap();
        let grad = dn.adjoint(&n).unwrap();
        if norm2(&grad) <= 1e-12 {
            continue;
        }
        tested += 1;
        let rhs: Vec<f64> = n.iter().map(|v| -v).collect();
        let opts = LsqrOptions {
            max_iters: cfg.lsqr_iters,
            damping: cfg.lambda.sqrt(),
            ..Default::default()
        };
        let delta = lsqr_solve(&dn, &rhs, &opts).unwrap().solution;
        if dot(&delta, &grad) < 0.0 {
            descent += 1;
        }
    }
    verdict(
        tested > 0 && descent == tested,
        format!("{descent}/{tested} truncated LSQR steps are descent directions"),
    )
}

fn criterion_8() -> Verdict {
    let args = ExperimentArgs {
        count: 100,
        seed: 0,
        noise: 1e-3,
        profile: SizeProfile::tiny(),
        kind: None,
        flags: RefineFlags::default(),
        csv: PathBuf::new(),
    };
    let start = Instant::now();
    let rows = experiment_rows(&args).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let increased = rows
        .iter()
        .filter(|r| r.resid_after > r.resid_before)
        .count();
    let tenfold = rows.iter().filter(|r| r.factor >= 10.0).count();
    let gm = geometric_mean(rows.iter().map(|r| r.factor));
    let min = rows.iter().map(|r| r.factor).fold(f64::INFINITY, f64::min);
    verdict(
        increased == 0 && tenfold * 10 >= rows.len() * 9 && gm >= 10.0 && secs < 300.0,
        format!(
            "{} instances, {increased} increased, factor >= 10 in {tenfold}, geometric mean {gm:.1}, min {min:.1}, {secs:.2} s",
            rows.len()
        ),
    )
}

fn criterion_9() -> Verdict {
    let (mut matched, mut certified, mut worst) = (0, 0, 0.0f64);
    for seed in 0..300 {
        let g = generate(seed, &SizeProfile::tiny(), None);
        let e = Embedding::new(&g.program).unwrap();
        let z = e.embed_solution(&g.witness).unwrap();
        let rec = e.recover(&z, DEFAULT_RECOVERY_TOL).unwrap();
        if rec.classification.kind() == Some(g.kind) {
            matched += 1;
        }
        if rec.certified {
            certified += 1;
        }
        if let Some(r) = &rec.residuals {
            worst = worst.max(r.max_normalized());
        }
    }
    verdict(
        matched == 300 && certified == 300 && worst <= 1e-8,
        format!(
            "{matched}/300 kinds reproduced, {certified}/300 certified, worst residual {worst:.2e}"
        ),
    )
}

fn cli(args: &[&str], dir: &Path, threads: Option<&str>) -> (i32, String) {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_cone-refine"));
    cmd.args(args)
        .current_dir(dir)
        .env_remove("CONE_REFINE_THREADS");
    if let Some(t) = threads {
        cmd.env("CONE_REFINE_THREADS", t);
    }
    let o = cmd.output().unwrap();
    (
        o.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&o.stdout).into_owned(),
    )
}

fn max_normalized(stdout: &str) -> Option<f64> {
    stdout
        .lines()
        .find_map(|l| l.strip_prefix("max normalized residual: "))
        .and_then(|v| v.parse().ok())
}

fn criterion_10() -> Verdict {
    let dir = tempfile::TempDir::new().unwrap();
    let d = dir.path();
    let mut problems = Vec::new();
    let mut worst_ratio = f64::INFINITY;
    for seed in 0..10u64 {
        let s = seed.to_string();
        let steps = [
            cli(&["generate", "--seed", &s, "--out", "p.json"], d, None),
            cli(&["check", "p.json", "p.witness.json"], d, None),
            cli(
                &[
                    "perturb",
                    "p.json",
                    "p.witness.json",
                    "--noise",
                    "1e-3",
                    "--seed",
                    &s,
                    "--out",
                    "n.json",
                ],
                d,
                None,
            ),
            cli(&["check", "p.json", "n.json"], d, None),
            cli(&["refine", "p.json", "n.json", "--out", "r.json"], d, None),
            cli(&["check", "p.json", "r.json"], d, None),
        ];
        let codes: Vec<i32> = steps.iter().map(|s| s.0).collect();
        if codes[..3] != [0, 0, 0] || codes[4] != 0 || codes[3] == 2 || codes[5] == 2 {
            problems.push(format!("seed {seed}: exit codes {codes:?}"));
            continue;
        }
        match (max_normalized(&steps[3].1), max_normalized(&steps[5].1)) {
            (Some(before), Some(after)) => {
                let ratio = before / after;
                worst_ratio = worst_ratio.min(ratio);
                if ratio < 10.0 {
                    problems.push(format!("seed {seed}: residual {before:.2e} -> {after:.2e}"));
                }
            }
            _ => problems.push(format!("seed {seed}: no residual reported")),
        }
    }
    let mut csvs = Vec::new();
    for threads in ["1", "4"] {
        let (code, _) = cli(
            &[
                "experiment",
                "--count",
                "10",
                "--seed",
                "0",
                "--csv",
                "e.csv",
            ],
            d,
            Some(threads),
        );
        if code != 0 {
            problems.push(format!("experiment exit {code}"));
        }
        csvs.push(std::fs::read_to_string(d.join("e.csv")).unwrap_or_default());
    }
    let strip = |t: &str| -> Vec<String> {
        t.lines()
            .map(|l| l.rsplit_once(',').map_or(l, |p| p.0).to_string())
            .collect()
    };
    let lines: Vec<&str> = csvs[0].lines().collect();
    if lines.first() != Some(&CSV_HEADER) || lines.len() != 11 {
        problems.push("CSV header or row count".into());
    }
    let in_order = lines
        .iter()
        .skip(1)
        .enumerate()
        .all(|(i, l)| l.split(',').next() == Some(i.to_string().as_str()));
    if !in_order {
        problems.push("CSV rows not in seed order".into());
    }
    if strip(&csvs[0]) != strip(&csvs[1]) {
        problems.push("CSV differs between thread counts".into());
    }
    verdict(
        problems.is_empty(),
        if problems.is_empty() {
            format!("10 seeds end to end, smallest reduction {worst_ratio:.1}x; CSV schema, order and determinism ok")
        } else {
            problems.join("; ")
        },
    )
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("derivative correctness", criterion_1),
        ("Moreau decomposition", criterion_2),
        ("self-adjointness and adjoint consistency", criterion_3),
        ("homogeneity", criterion_4),
        ("exact-witness residual", criterion_5),
        ("LSQR oracle equivalence", criterion_6),
        ("descent property", criterion_7),
        ("refinement efficacy", criterion_8),
        ("classification round trip", criterion_9),
        ("CLI end to end", criterion_10),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let v = f();
        let tag = if v.pass { "PASS" } else { "FAIL" };
        if !v.pass {
            failed += 1;
        }
        println!(
            "{tag} criterion {}: {name}: {} [{:.2} s]",
            i + 1,
            v.detail,
            start.elapsed().as_secs_f64()
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
    println!("all 10 criteria passed");
}
