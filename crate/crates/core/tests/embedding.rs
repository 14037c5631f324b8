use cone_refine::embedding::{Classification, Embedding, DEFAULT_RECOVERY_TOL};
use cone_refine::linalg::{dot, norm2, LinearOperator};
use cone_refine::problems::{generate, perturb, ProblemKind, SizeProfile};
use cone_refine::Error;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn random_vec(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    use rand::Rng;
    (0..len).map(|_| rng.random_range(-1.0..1.0)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn q_is_skew_symmetric(seed in 0u64..10_000, vseed in any::<u64>()) {
        let g = generate(seed, &SizeProfile::tiny(), None);
        let e = Embedding::new(&g.program).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(vseed);
        let u = random_vec(&mut rng, e.total_dim());
        let v = random_vec(&mut rng, e.total_dim());
        let qu = e.apply_q(&u).unwrap();
        let fro = (g.program.a.frobenius_norm().powi(2)
            + dot(&g.program.b, &g.program.b)
            + dot(&g.program.c, &g.program.c))
        .sqrt();
        prop_assert!(dot(&qu, &u).abs() <= 1e-12 * fro * dot(&u, &u));
        let qv = e.q_operator().forward(&v).unwrap();
        let qtu = e.q_operator().adjoint(&u).unwrap();
        prop_assert!((dot(&qu, &v) + dot(&u, &qv)).abs() <= 1e-12 * fro * norm2(&u) * norm2(&v));
        prop_assert!((dot(&qv, &u) - dot(&v, &qtu)).abs() <= 1e-12 * fro * norm2(&u) * norm2(&v));
    }

    #[test]
    fn residual_is_positively_homogeneous(seed in 0u64..10_000, vseed in any::<u64>()) {
        let g = generate(seed, &SizeProfile::tiny(), None);
        let e = Embedding::new(&g.program).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(vseed);
        let mut z = random_vec(&mut rng, e.total_dim());
        let last = z.len() - 1;
        if z[last].abs() < 0.1 {
            z[last] = 0.5;
        }
        let r = e.residual(&z).unwrap();
        let n = e.normalized_residual(&z).unwrap();
        for alpha in [0.5, 2.0, 10.0] {
            let az: Vec<f64> = z.iter().map(|v| alpha * v).collect();
            let ar: Vec<f64> = r.iter().map(|v| alpha * v).collect();
            prop_assert!(norm2(&sub(&e.residual(&az).unwrap(), &ar)) <= 1e-12 * alpha * norm2(&z));
            prop_assert!(norm2(&sub(&e.normalized_residual(&az).unwrap(), &n)) <= 1e-12);
        }
    }

    #[test]
    fn minty_round_trip_and_orthogonality(seed in 0u64..10_000, vseed in any::<u64>()) {
        let g = generate(seed, &SizeProfile::tiny(), None);
        let e = Embedding::new(&g.program).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(vseed);
        let z = random_vec(&mut rng, e.total_dim());
        let (u, v) = e.minty(&z).unwrap();
        let back = e.minty_inverse(&u, &v).unwrap();
        for (a, b) in back.iter().zip(&z) {
            prop_assert!((a - b).abs() <= f64::EPSILON * (a.abs() + b.abs() + 4.0));
        }
        prop_assert!(dot(&u, &v).abs() <= 1e-9 * dot(&z, &z));
    }

    #[test]
    fn normalized_residual_adjoint_consistency(seed in 0u64..10_000, vseed in any::<u64>(), neg in any::<bool>()) {
        let g = generate(seed, &SizeProfile::tiny(), None);
        let e = Embedding::new(&g.program).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(vseed);
        let mut z = random_vec(&mut rng, e.total_dim());
        let last = z.len() - 1;
        z[last] = if neg { -0.7 } else { 0.7 };
        let u = random_vec(&mut rng, e.total_dim());
        let v = random_vec(&mut rng, e.total_dim());
        let dn = e.d_normalized_residual(&z).unwrap();
        let gap = (dot(&dn.forward(&u).unwrap(), &v) - dot(&u, &dn.adjoint(&v).unwrap())).abs();
        prop_assert!(gap <= 1e-10 * norm2(&u) * norm2(&v));
        let dr = e.d_residual(&z).unwrap();
        let gap = (dot(&dr.forward(&u).unwrap(), &v) - dot(&u, &dr.adjoint(&v).unwrap())).abs();
        prop_assert!(gap <= 1e-10 * norm2(&u) * norm2(&v));
    }

    #[test]
    fn normalized_residual_matches_finite_differences(seed in 0u64..10_000, vseed in any::<u64>()) {
        // perturbed witnesses sit at generic points of the projection
        let g = generate(seed, &SizeProfile::tiny(), None);
        let e = Embedding::new(&g.program).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(vseed);
        let z = perturb(&e.embed_solution(&g.witness).unwrap(), 0.3, &mut rng);
        let dir = random_vec(&mut rng, e.total_dim());
        let h = 1e-6;
        let plus: Vec<f64> = z.iter().zip(&dir).map(|(a, b)| a + h * b).collect();
        let minus: Vec<f64> = z.iter().zip(&dir).map(|(a, b)| a - h * b).collect();
        let fd: Vec<f64> = e
            .normalized_residual(&plus)
            .unwrap()
            .iter()
            .zip(e.normalized_residual(&minus).unwrap())
            .map(|(a, b)| (a - b) / (2.0 * h))
            .collect();
        let jd = e.d_normalized_residual(&z).unwrap().forward(&dir).unwrap();
        let err = norm2(&sub(&fd, &jd));
        // a kink of the projection inside the stencil makes differences
        // meaningless; those draws are rare and skipped
        let kink = {
            let p = e.project_embedded(&plus).unwrap();
            let m = e.project_embedded(&minus).unwrap();
            let pd: Vec<f64> = p.iter().zip(&m).map(|(a, b)| (a - b) / (2.0 * h)).collect();
            let blocks = cone_refine::cones::ProjectionJacobian::new(e.cone_blocks(), &z).unwrap();
            norm2(&sub(&pd, &blocks.forward(&dir).unwrap())) > 1e-4 * norm2(&dir)
        };
        prop_assume!(!kink);
        prop_assert!(err <= 1e-5 * norm2(&jd).max(1.0), "err {err:e} |jd| {:e}", norm2(&jd));
    }
}

#[test]
fn exact_witnesses_have_zero_residual_and_round_trip() {
    for seed in 0..300 {
        let g = generate(seed, &SizeProfile::tiny(), None);
        let e = Embedding::new(&g.program).unwrap();
        let z = e.embed_solution(&g.witness).unwrap();
        let n = norm2(&e.normalized_residual(&z).unwrap());
        assert!(n <= 1e-9 * norm2(&z).max(1.0), "seed {seed}: {n:e}");
        let rec = e.recover(&z, DEFAULT_RECOVERY_TOL).unwrap();
        assert_eq!(rec.classification.kind(), Some(g.kind), "seed {seed}");
        assert!(rec.certified, "seed {seed}");
        assert!(!rec.degenerate, "seed {seed}");
    }
}

#[test]
fn recovered_solution_reembeds_to_same_point() {
    let g = generate(4, &SizeProfile::tiny(), Some(ProblemKind::Feasible));
    let e = Embedding::new(&g.program).unwrap();
    let z = e.embed_solution(&g.witness).unwrap();
    let rec = e.recover(&z, DEFAULT_RECOVERY_TOL).unwrap();
    let z2 = e.embed_solution(&rec.classification).unwrap();
    assert!(norm2(&sub(&z, &z2)) <= 1e-14 * norm2(&z));
    // u - v of the minty map reproduces the embedded point
    let (u, v) = e.minty(&z).unwrap();
    assert!(norm2(&sub(&e.minty_inverse(&u, &v).unwrap(), &z)) <= 1e-15 * norm2(&z));
}

#[test]
fn primal_certificate_has_the_expected_form() {
    let g = generate(8, &SizeProfile::tiny(), Some(ProblemKind::Infeasible));
    let e = Embedding::new(&g.program).unwrap();
    let Classification::PrimalInfeasible { y } = &g.witness else {
        panic!("wrong witness");
    };
    let z = e.embed_solution(&g.witness).unwrap();
    let n = g.program.n();
    assert!(z[..n].iter().all(|v| *v == 0.0));
    assert_eq!(&z[n..z.len() - 1], y.as_slice());
    assert_eq!(z[z.len() - 1], -1.0);
    let rec = e.recover(&z, DEFAULT_RECOVERY_TOL).unwrap();
    assert_eq!(rec.tau, 0.0);
    assert_eq!(rec.kappa, 1.0);
}

#[test]
fn errors_on_bad_input() {
    let g = generate(1, &SizeProfile::tiny(), None);
    let e = Embedding::new(&g.program).unwrap();
    let mut z = vec![0.5; e.total_dim()];
    assert!(matches!(
        e.residual(&z[1..]),
        Err(Error::DimensionMismatch { .. })
    ));
    let last = z.len() - 1;
    z[last] = 0.0;
    assert!(matches!(
        e.normalized_residual(&z),
        Err(Error::ZeroHomogenizer)
    ));
    assert!(matches!(
        e.d_normalized_residual(&z),
        Err(Error::ZeroHomogenizer)
    ));
    assert!(matches!(
        e.embed_solution(&Classification::Indeterminate),
        Err(Error::Indeterminate)
    ));
    let zero = e
        .recover(&vec![0.0; e.total_dim()], DEFAULT_RECOVERY_TOL)
        .unwrap();
    assert_eq!(zero.classification, Classification::Indeterminate);
    assert!(zero.residuals.is_none());
}
