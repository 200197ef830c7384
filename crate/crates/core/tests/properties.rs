//! Property tests for the invariants the learners and the control reduction
//! rely on.

use bandit_lds::bco::{run_arm, LearnerRegistry, RunParams};
use bandit_lds::control::{choose_truncation, make_stabilizable_system, markov_operator, SystemConfig};
use bandit_lds::geometry::{mahalanobis_project, op_norm, sample_unit_sphere, ConvexSet, PsdMatrix};
use bandit_lds::harness::fit_loglog;
use bandit_lds::losses::{make_synthetic_bcom_instance, SyntheticConfig};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn set_strategy() -> impl Strategy<Value = ConvexSet> {
    prop_oneof![
        (1usize..6, 0.2f64..3.0).prop_map(|(d, r)| ConvexSet::centered_ball(d, r).unwrap()),
        (1usize..6, 0.1f64..1.0, 0.1f64..1.0)
            .prop_map(|(d, lo, hi)| ConvexSet::boxed(DVector::from_element(d, -lo), DVector::from_element(d, hi)).unwrap()),
        (1usize..4, 1usize..3, 1usize..3, 0.2f64..2.0)
            .prop_map(|(m, du, dy, r)| ConvexSet::operator_l1(m, du, dy, r).unwrap()),
    ]
}

/// A set, a well-conditioned metric and a point, all of matching dimension.
fn triple() -> impl Strategy<Value = (ConvexSet, PsdMatrix, DVector<f64>)> {
    set_strategy().prop_flat_map(|set| {
        let d = set.dim();
        (
            Just(set),
            proptest::collection::vec(-1.0f64..1.0, d * d),
            proptest::collection::vec(0.3f64..3.0, d),
            proptest::collection::vec(-4.0f64..4.0, d),
        )
            .prop_map(move |(set, g, diag, p)| {
                let q = DMatrix::from_vec(d, d, g).qr().q();
                let a = &q * DMatrix::from_diagonal(&DVector::from_vec(diag)) * q.transpose();
                (set, PsdMatrix::new((&a + a.transpose()) * 0.5).unwrap(), DVector::from_vec(p))
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn projection_is_feasible_idempotent_and_optimal((set, a, p) in triple(), seed in any::<u64>()) {
        let x = mahalanobis_project(&set, &a, &p).unwrap();
        prop_assert!(set.contains_with(&x, 1e-7));
        let again = mahalanobis_project(&set, &a, &x).unwrap();
        prop_assert!((&again - &x).norm() <= 1e-6 * (1.0 + x.norm()));
        let g = a.matrix() * (&x - &p);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..20 {
            let y = set.sample_point(&mut rng);
            prop_assert!(g.dot(&(y - &x)) >= -1e-7 * g.norm().max(1.0));
        }
    }

    #[test]
    fn psd_square_root_squares_back((_, a, _) in triple()) {
        let s = a.sqrt();
        prop_assert!((&s * &s - a.matrix()).amax() <= 1e-10 * a.max_eigenvalue());
        let inv = a.inv_sqrt(1e-12).unwrap();
        let id = inv.matrix() * a.matrix() * inv.matrix();
        prop_assert!((id - DMatrix::identity(a.dim(), a.dim())).amax() <= 1e-9);
    }

    #[test]
    fn sphere_samples_have_unit_norm(d in 1usize..12, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v = sample_unit_sphere(d, &mut rng).unwrap();
        prop_assert!((v.vector().norm() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn power_laws_fit_exactly(slope in -1.0f64..2.0, scale in 0.01f64..100.0) {
        let xs: Vec<f64> = (4..10).map(|k| (1u64 << k) as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| scale * x.powf(slope)).collect();
        let fit = fit_loglog(&xs, &ys).unwrap();
        prop_assert!((fit.slope - slope).abs() <= 1e-9);
        prop_assert!((fit.intercept - scale.ln()).abs() <= 1e-8);
    }

    #[test]
    fn markov_blocks_respect_their_decay_certificate(
        gamma in 0.2f64..0.8,
        kappa in 1.0f64..3.0,
        seed in any::<u64>(),
    ) {
        let config = SystemConfig { dx: 3, du: 2, dy: 2, kappa, gamma, kappa_sys: 2.0, seed };
        let (inst, ctrl) = make_stabilizable_system(&config).unwrap();
        let n = choose_truncation(&inst, &ctrl, 200);
        let mk = markov_operator(&inst, &ctrl, n).unwrap();
        for i in 1..n {
            prop_assert!(op_norm(mk.block(i).unwrap()) <= mk.decay_bound(i) * (1.0 + 1e-9));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    /// Updates are `m` apart at least, and the newton learner's metric only
    /// grows, so its log-determinant never decreases.
    #[test]
    fn learner_updates_are_spaced_and_metric_grows(m in 1usize..6, seed in any::<u64>()) {
        let t = 600;
        let inst = make_synthetic_bcom_instance(&SyntheticConfig::new(2, m, t, 0.5, 2.0, 16.0, seed)).unwrap();
        let p = RunParams::new(1.0 / (t as f64).sqrt(), m, 0.5, t, seed);
        let run = run_arm(&LearnerRegistry::default(), "newton", &inst.losses, &inst.set, &p).unwrap();
        if let Some(gap) = run.trace.min_gap() {
            prop_assert!(gap >= m);
        }
        prop_assert!(run.logdet.windows(2).all(|w| w[1] >= w[0] - 1e-12));
        prop_assert_eq!(run.trace.updates.len(), run.updated.iter().filter(|u| **u).count());
    }
}
