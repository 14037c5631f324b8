use cone_refine::cones::ConeSpec;
use cone_refine::embedding::{Classification, Embedding, DEFAULT_RECOVERY_TOL};
use cone_refine::linalg::{norm_inf, SparseMatrix};
use cone_refine::problems::{
    generate, kkt_residuals, make_feasible, perturb, ProblemKind, SizeProfile,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn kind_frequencies_match_probabilities() {
    let trials = 10_000;
    let mut counts = [0usize; 3];
    for seed in 0..trials {
        let k = generate(seed, &SizeProfile::tiny(), None).kind;
        counts[k as usize] += 1;
    }
    for (count, p) in counts.iter().zip([0.8, 0.1, 0.1]) {
        let mean = p * trials as f64;
        let sigma = (trials as f64 * p * (1.0 - p)).sqrt();
        assert!((*count as f64 - mean).abs() <= 3.0 * sigma, "{counts:?}");
    }
}

#[test]
fn witnesses_satisfy_their_conditions() {
    for seed in 0..100 {
        let g = generate(seed, &SizeProfile::tiny(), None);
        let r = kkt_residuals(&g.program, &g.witness).unwrap();
        assert!(r.passes(1e-9), "seed {seed}: {r:?}");
    }
}

#[test]
fn paper_profile_sizes() {
    let g = generate(0, &SizeProfile::paper(), None);
    let c = &g.program.cones;
    assert!((10..=50).contains(&c.zero));
    assert!((20..=100).contains(&c.nonneg));
    assert!((2..=100).contains(&c.soc.len()));
    assert!(c.soc.iter().all(|d| (5..=20).contains(d)));
    assert!((5..=20).contains(&c.psd.len()));
    assert!(c.psd.iter().all(|d| (2..=10).contains(d)));
    assert!((2..=10).contains(&c.exp_primal));
    assert!((2..=10).contains(&c.exp_dual));
    let r = kkt_residuals(&g.program, &g.witness).unwrap();
    assert!(r.passes(1e-9));
}

#[test]
fn hand_lp_construction() {
    // min x s.t. -x + s = -1, s >= 0: x = 1, y = 1, s = 0
    let a = SparseMatrix::from_triplets(1, 1, &[(0, 0, -1.0)]).unwrap();
    let cones = ConeSpec {
        nonneg: 1,
        ..Default::default()
    };
    let p = make_feasible(a, cones, &[1.0], &[0.0], &[1.0]);
    assert_eq!(p.b, vec![-1.0]);
    assert_eq!(p.c, vec![1.0]);
    let e = Embedding::new(&p).unwrap();
    let z = e
        .embed_solution(&Classification::Optimal {
            x: vec![1.0],
            y: vec![1.0],
            s: vec![0.0],
        })
        .unwrap();
    assert_eq!(z, vec![1.0, 1.0, 1.0]);
}

#[test]
fn noisy_witness_residuals_track_the_noise() {
    let g = generate(2, &SizeProfile::tiny(), Some(ProblemKind::Feasible));
    let Classification::Optimal { x, y, s } = &g.witness else {
        panic!("wrong witness")
    };
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let noisy = Classification::Optimal {
        x: perturb(x, 1e-3, &mut rng),
        y: perturb(y, 1e-3, &mut rng),
        s: perturb(s, 1e-3, &mut rng),
    };
    let r = kkt_residuals(&g.program, &noisy).unwrap();
    let worst = r.max_normalized();
    assert!(worst > 1e-5 && worst < 1e-1, "{worst:e}");
    assert!(!r.passes(1e-8));
}

#[test]
fn certificates_survive_a_round_trip_through_recover() {
    for kind in [ProblemKind::Infeasible, ProblemKind::Unbounded] {
        for seed in 0..30 {
            let g = generate(seed, &SizeProfile::tiny(), Some(kind));
            let e = Embedding::new(&g.program).unwrap();
            let z = e.embed_solution(&g.witness).unwrap();
            let rec = e.recover(&z, DEFAULT_RECOVERY_TOL).unwrap();
            if rec.degenerate {
                // random b can make an unbounded instance primal infeasible
                // as well, e.g. through the null space of a singular PSD
                // block of s; both certificates then hold
                assert_eq!(kind, ProblemKind::Unbounded);
                assert!(rec.certified);
                continue;
            }
            assert_eq!(
                rec.classification.kind(),
                Some(kind),
                "{kind:?} seed {seed}"
            );
            let res = rec.residuals.unwrap();
            let eq = if kind == ProblemKind::Infeasible {
                "b'y+1"
            } else {
                "c'x+1"
            };
            assert!(res.get(eq).unwrap().max_abs <= 1e-12);
            match &rec.classification {
                Classification::PrimalInfeasible { y } => {
                    let aty = cone_refine::linalg::spmv_t(&g.program.a, y).unwrap();
                    assert!(norm_inf(&aty) <= 1e-10);
                }
                Classification::DualInfeasible { .. } => {}
                other => panic!("unexpected {other:?}"),
            }
        }
    }
}
