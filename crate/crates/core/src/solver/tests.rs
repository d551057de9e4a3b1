use super::*;
use crate::certificate::Verdict;
use crate::ensemble::{generate, DensityMatrix, EnsembleSpec};
use crate::matrix::HermitianMatrix;
use crate::measurement::p_correct;
use approx::assert_abs_diff_eq;

fn diag(d: &[f64]) -> HermitianMatrix {
    HermitianMatrix::from_real_diagonal(d)
}

fn orthogonal_pair() -> (Ensemble, Povm) {
    let ens = generate(&EnsembleSpec::PurePair {
        overlap: 0.0,
        priors: [0.5, 0.5],
    })
    .unwrap();
    let proj = validate_povm([diag(&[1., 0.]), diag(&[0., 1.])]).unwrap();
    (ens, proj)
}

fn trine() -> Ensemble {
    generate(&EnsembleSpec::Trine).unwrap()
}

fn basis(d: usize, k: usize) -> ComplexVector {
    let mut v = ComplexVector::zeros(d);
    v[k] = Complex64::new(1.0, 0.0);
    v
}

#[test]
fn no_mode_at_an_optimum() {
    let (ens, proj) = orthogonal_pair();
    assert!(find_negative_mode(&ens, &proj, 1e-8).unwrap().is_none());

    let single = generate(&EnsembleSpec::RandomMixed {
        dim: 2,
        n: 1,
        seed: 4,
    })
    .unwrap();
    assert!(
        find_negative_mode(&single, &uniform_povm(1, 2).unwrap(), 1e-8)
            .unwrap()
            .is_none()
    );
}

#[test]
fn uniform_trine_has_a_mode() {
    let ens = trine();
    let u = uniform_povm(3, 2).unwrap();
    let mode = find_negative_mode(&ens, &u, 1e-8)
        .unwrap()
        .expect("suboptimal");
    assert_abs_diff_eq!(mode.lambda, 1.0 / 6.0, epsilon = 1e-12);
    // all three G_j tie; the smallest index wins
    assert_eq!(mode.outcome, 0);
    let g = crate::certificate::g_operator(&ens, &u, 0).unwrap();
    let r = g.as_matrix() * &mode.vector + &mode.vector * Complex64::new(mode.lambda, 0.0);
    assert!(r.norm() < 1e-10);
}

#[test]
fn full_step_on_a_projective_measurement() {
    let proj = validate_povm([diag(&[1., 0.]), diag(&[0., 1.])]).unwrap();
    let mode = NegativeMode {
        outcome: 1,
        lambda: 1.0,
        vector: basis(2, 0),
    };
    let out = perturb(&proj, &mode, 1.0).unwrap();
    assert_abs_diff_eq!(out.element(0).frobenius_norm(), 0.0, epsilon = 1e-15);
    assert_abs_diff_eq!(
        (out.element(1).as_matrix() - diag(&[1., 1.]).as_matrix()).norm(),
        0.0,
        epsilon = 1e-15
    );
}

#[test]
fn vanishing_step_is_the_identity_map() {
    let ens = trine();
    let u = uniform_povm(3, 2).unwrap();
    let mode = find_negative_mode(&ens, &u, 1e-8).unwrap().unwrap();
    let out = perturb(&u, &mode, 1e-300).unwrap();
    for (a, b) in out.elements().iter().zip(u.elements()) {
        assert_abs_diff_eq!((a.as_matrix() - b.as_matrix()).norm(), 0.0, epsilon = 1e-15);
    }
}

#[test]
fn epsilon_range_is_enforced() {
    let proj = validate_povm([diag(&[1., 0.]), diag(&[0., 1.])]).unwrap();
    let mode = NegativeMode {
        outcome: 1,
        lambda: 1.0,
        vector: basis(2, 0),
    };
    for eps in [0.0, -0.1, 1.0 + 1e-12, f64::NAN] {
        assert!(matches!(
            perturb(&proj, &mode, eps),
            Err(Error::EpsilonOutOfRange(_))
        ));
    }
    let bad = NegativeMode {
        outcome: 2,
        ..mode.clone()
    };
    assert!(matches!(
        perturb(&proj, &bad, 0.5),
        Err(Error::IndexOutOfRange { .. })
    ));
    let bad = NegativeMode {
        vector: basis(3, 0),
        ..mode
    };
    assert!(matches!(
        perturb(&proj, &bad, 0.5),
        Err(Error::DimensionMismatch { .. })
    ));
}

#[test]
fn trine_step_gains_two_epsilon_lambda_to_first_order() {
    let ens = trine();
    let u = uniform_povm(3, 2).unwrap();
    let mode = find_negative_mode(&ens, &u, 1e-8).unwrap().unwrap();
    let eps = 0.1;
    let before = p_correct(&ens, &u).unwrap();
    let after = p_correct(&ens, &perturb(&u, &mode, eps).unwrap()).unwrap();
    let q = gain_quadratic(&ens, &u, &mode).unwrap();
    assert_abs_diff_eq!(q.linear, 2.0 * mode.lambda, epsilon = 1e-12);
    assert_abs_diff_eq!(
        after - before,
        2.0 * eps * mode.lambda + q.quadratic * eps * eps,
        epsilon = 1e-12
    );
    assert!(after - before > 0.0);
}

#[test]
fn first_order_limit() {
    let ens = trine();
    let u = uniform_povm(3, 2).unwrap();
    let mode = find_negative_mode(&ens, &u, 1e-8).unwrap().unwrap();
    let eps = 1e-6;
    let g = gain(&ens, &u, &mode, eps).unwrap();
    assert!((g / eps - 2.0 * mode.lambda).abs() <= 1e-6);
}

#[test]
fn quadratic_argmax() {
    // -b/2a = 0.3
    let q = GainQuadratic {
        quadratic: -1.0,
        linear: 0.6,
    };
    assert_abs_diff_eq!(q.argmax(), 0.3, epsilon = 1e-15);
    let q = GainQuadratic {
        quadratic: 0.2,
        linear: 0.6,
    };
    assert_eq!(q.argmax(), 1.0);
    let q = GainQuadratic {
        quadratic: -0.1,
        linear: 0.6,
    };
    assert_eq!(q.argmax(), 1.0);
}

#[test]
fn trine_best_epsilon_gains() {
    let ens = trine();
    let u = uniform_povm(3, 2).unwrap();
    let mode = find_negative_mode(&ens, &u, 1e-8).unwrap().unwrap();
    let eps = best_epsilon(&ens, &u, &mode).unwrap();
    assert!(eps > 0.0 && eps <= 1.0);
    assert!(gain(&ens, &u, &mode, eps).unwrap() > 0.0);
}

#[test]
fn solve_orthogonal_pair() {
    let (ens, _) = orthogonal_pair();
    let t = solve(&ens, None, &SolverConfig::default()).unwrap();
    assert!(t.converged);
    assert_abs_diff_eq!(t.p_corr(), 1.0, epsilon = 1e-7);
}

#[test]
fn solve_pure_pairs_matches_helstrom() {
    for (c, q) in [(0.3, 0.5), (0.5, 0.2), (0.8, 0.65), (0.95, 0.9)] {
        let ens = generate(&EnsembleSpec::PurePair {
            overlap: c,
            priors: [q, 1.0 - q],
        })
        .unwrap();
        let t = solve(&ens, None, &SolverConfig::default()).unwrap();
        assert!(t.converged);
        let want = 0.5 * (1.0 + (1.0 - 4.0 * q * (1.0 - q) * c * c).sqrt());
        assert_abs_diff_eq!(t.p_corr(), want, epsilon = 1e-6);
        for w in t.iterations.windows(2) {
            assert!(w[1].p_corr > w[0].p_corr);
        }
    }
}

#[test]
fn solve_from_srm_start_on_trine_is_immediate() {
    let cfg = SolverConfig {
        start: StartKind::SquareRoot,
        ..SolverConfig::default()
    };
    let t = solve(&trine(), None, &cfg).unwrap();
    assert!(t.converged);
    assert_eq!(t.iterations_used, 0);
    assert_abs_diff_eq!(t.p_corr(), 2.0 / 3.0, epsilon = 1e-12);
}

#[test]
fn solve_trine_from_uniform() {
    let t = solve(&trine(), None, &SolverConfig::default()).unwrap();
    assert!(t.converged, "{:?}", t.stop_reason);
    assert!(t.final_certificate.is_optimal());
    assert_abs_diff_eq!(t.p_corr(), 2.0 / 3.0, epsilon = 1e-6);
}

#[test]
fn budget_exhaustion_is_reported() {
    let cfg = SolverConfig {
        max_iter: 10,
        ..SolverConfig::default()
    };
    let t = solve(&trine(), None, &cfg).unwrap();
    assert!(!t.converged);
    assert_eq!(t.stop_reason, StopReason::MaxIterations);
    assert_eq!(t.iterations_used, 10);
    assert!(matches!(
        t.final_certificate.verdict,
        Verdict::NotOptimal { .. }
    ));
    assert!(t.p_corr() > t.initial_p_corr);
}

#[test]
fn stall_triggers_restarts() {
    let cfg = SolverConfig {
        stall_threshold: 1.0,
        ..SolverConfig::default()
    };
    let t = solve(&trine(), None, &cfg).unwrap();
    assert!(!t.converged);
    assert_eq!(t.stop_reason, StopReason::Stalled);
    assert_eq!(t.restarts, MAX_RESTARTS);
}

#[test]
fn invalid_config_is_rejected() {
    let ens = trine();
    for cfg in [
        SolverConfig {
            tol: 0.0,
            ..SolverConfig::default()
        },
        SolverConfig {
            max_iter: 0,
            ..SolverConfig::default()
        },
        SolverConfig {
            stall_threshold: f64::NAN,
            ..SolverConfig::default()
        },
    ] {
        assert!(solve(&ens, None, &cfg).is_err());
    }
    let wrong = uniform_povm(2, 2).unwrap();
    assert!(matches!(
        solve(&ens, Some(&wrong), &SolverConfig::default()),
        Err(Error::CountMismatch { .. })
    ));
}

#[test]
fn helstrom_examples() {
    let rho = DensityMatrix::maximally_mixed(2).unwrap();
    let (povm, p) = helstrom_binary(0.5, &rho, 0.5, &rho).unwrap();
    assert_abs_diff_eq!(p, 0.5, epsilon = 1e-15);
    assert_abs_diff_eq!(
        (povm.element(0).as_matrix() - diag(&[1., 1.]).as_matrix()).norm(),
        0.0,
        epsilon = 1e-15
    );

    let (ens, _) = orthogonal_pair();
    let (_, p) = helstrom_binary(0.5, &ens.states()[0], 0.5, &ens.states()[1]).unwrap();
    assert_abs_diff_eq!(p, 1.0, epsilon = 1e-15);

    let half = generate(&EnsembleSpec::PurePair {
        overlap: 0.5,
        priors: [0.5, 0.5],
    })
    .unwrap();
    let (povm, p) = helstrom_binary(0.5, &half.states()[0], 0.5, &half.states()[1]).unwrap();
    assert_abs_diff_eq!(p, 0.5 * (1.0 + 3f64.sqrt() / 2.0), epsilon = 1e-12);
    assert_abs_diff_eq!(p_correct(&half, &povm).unwrap(), p, epsilon = 1e-12);
    assert!(crate::certificate::certify(&half, &povm, 1e-7)
        .unwrap()
        .is_optimal());

    assert!(helstrom_binary(0.5, &rho, 0.6, &rho).is_err());
    let rho3 = DensityMatrix::maximally_mixed(3).unwrap();
    assert!(matches!(
        helstrom_binary(0.5, &rho, 0.5, &rho3),
        Err(Error::DimensionMismatch { .. })
    ));
}

#[test]
fn brute_force_examples() {
    let (ens, _) = orthogonal_pair();
    let (_, p) = brute_force(&ens, 4, 1).unwrap();
    assert_abs_diff_eq!(p, 1.0, epsilon = 1e-7);

    let half = generate(&EnsembleSpec::PurePair {
        overlap: 0.5,
        priors: [0.5, 0.5],
    })
    .unwrap();
    let (_, p) = brute_force(&half, 4, 2).unwrap();
    let (_, h) = helstrom_binary(0.5, &half.states()[0], 0.5, &half.states()[1]).unwrap();
    assert_abs_diff_eq!(p, h, epsilon = 1e-6);
}

#[test]
fn brute_force_guard_rails() {
    let big = generate(&EnsembleSpec::RandomMixed {
        dim: 5,
        n: 2,
        seed: 1,
    })
    .unwrap();
    assert!(matches!(brute_force(&big, 4, 0), Err(Error::GuardRail(_))));
    let many = generate(&EnsembleSpec::RandomMixed {
        dim: 2,
        n: 5,
        seed: 1,
    })
    .unwrap();
    assert!(matches!(brute_force(&many, 4, 0), Err(Error::GuardRail(_))));
    let (ens, _) = orthogonal_pair();
    assert!(matches!(brute_force(&ens, 0, 0), Err(Error::GuardRail(_))));
}
