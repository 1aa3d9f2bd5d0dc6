use camel::correlation::{
    admm_lasso, build_collaboration_matrix, kkt_violation, lambda_heuristic,
    learn_correlation_matrix, soft_threshold, AdmmSettings, CorrelationSettings, LambdaRule,
    LassoProblem,
};
use camel::oracle::{lasso_coordinate_descent, lasso_objective};
use camel::Matrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn random_labels(rng: &mut ChaCha8Rng, n: usize, q: usize) -> Matrix<f64> {
    // a shared latent sign makes columns correlated
    let latent: Vec<bool> = (0..n).map(|_| rng.random_bool(0.5)).collect();
    Matrix::from_fn(n, q, |i, _| {
        let agree = rng.random_bool(0.75);
        if latent[i] == agree { 1.0 } else { -1.0 }
    })
}

#[test]
fn admm_matches_coordinate_descent_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let settings = AdmmSettings::default();
    for case in 0..20 {
        let n = rng.random_range(8..=30);
        let q = rng.random_range(3..=10);
        let labels = random_labels(&mut rng, n, q);
        for j in 0..q {
            let p = LassoProblem::for_label(&labels, j, None).unwrap();
            let admm = admm_lasso(&p, &settings).unwrap();
            let cd = lasso_coordinate_descent(p.design(), p.target(), p.lambda(), 1e-12, 100_000);
            assert!(cd.converged);
            let a = lasso_objective(p.design(), p.target(), p.lambda(), &admm.z);
            let b = lasso_objective(p.design(), p.target(), p.lambda(), &cd.coeffs);
            assert!((a - b).abs() <= 1e-6, "case {case} label {j}: {a} vs {b}");
            assert!((p.objective(&admm.z).unwrap() - a).abs() <= 1e-9);
        }
    }
}

#[test]
fn converged_solutions_satisfy_kkt() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..20 {
        let n = rng.random_range(8..=30);
        let q = rng.random_range(3..=10);
        let labels = random_labels(&mut rng, n, q);
        for j in 0..q {
            let p = LassoProblem::for_label(&labels, j, None).unwrap();
            let s = admm_lasso(&p, &AdmmSettings::default()).unwrap();
            if s.converged {
                assert!(kkt_violation(&p, &s.z).unwrap() <= 1e-5);
            }
        }
    }
}

#[test]
fn zero_solution_above_lambda_max() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let labels = random_labels(&mut rng, 20, 5);
    let p0 = LassoProblem::for_label(&labels, 0, None).unwrap();
    let lambda_max = p0.design().tr_matvec(p0.target()).unwrap().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let p = LassoProblem::for_label(&labels, 0, Some(lambda_max * 1.01)).unwrap();
    let s = admm_lasso(&p, &AdmmSettings::default()).unwrap();
    assert!(s.z.iter().all(|&v| v == 0.0));
    let cd = lasso_coordinate_descent(p.design(), p.target(), p.lambda(), 1e-12, 1000);
    assert!(cd.coeffs.iter().all(|&v| v == 0.0));
}

#[test]
fn scalar_problem_closed_form() {
    // one column of ones, target of ones: w = 1 - lambda / n
    let n = 8;
    let design = Matrix::filled(n, 1, 1.0);
    let p = LassoProblem::new(design, vec![1.0; n], 2.0).unwrap();
    let s = admm_lasso(&p, &AdmmSettings::default()).unwrap();
    assert!((s.z[0] - (1.0 - 2.0 / n as f64)).abs() < 1e-7);
}

fn gaussian_problem(seed: u64, n: usize, p: usize) -> LassoProblem<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let design = Matrix::from_fn(n, p, |_, _| rng.sample(StandardNormal));
    let target: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let lambda = lambda_heuristic(&target, &design).unwrap() * 10.0;
    LassoProblem::new(design, target, lambda).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn soft_threshold_properties(a in -10.0f64..10.0, omega in 0.0f64..5.0) {
        let s = soft_threshold(a, omega).unwrap();
        prop_assert!(s.abs() <= a.abs());
        prop_assert!(s == 0.0 || s.signum() == a.signum());
        if a.abs() <= omega { prop_assert_eq!(s, 0.0); } else { prop_assert!((s.abs() - (a.abs() - omega)).abs() < 1e-12); }
    }

    #[test]
    fn merit_is_non_increasing(seed in any::<u64>(), n in 15usize..40, p in 2usize..8) {
        let problem = gaussian_problem(seed, n, p);
        let s = admm_lasso(&problem, &AdmmSettings::default()).unwrap();
        for w in s.merit_history.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-9, "{} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn sparsity_is_monotone_for_orthogonal_designs(
        seed in any::<u64>(),
        cols in prop::collection::btree_set(1usize..16, 2..8),
    ) {
        // columns of a 16x16 Sylvester-Hadamard matrix are orthogonal, so the
        // lasso solution is a soft threshold of A'b / n and shrinks monotonically
        let n = 16;
        let hadamard = |i: usize, j: usize| if (i & j).count_ones().is_multiple_of(2) { 1.0 } else { -1.0 };
        let cols: Vec<usize> = cols.into_iter().collect();
        let design = Matrix::from_fn(n, cols.len(), |i, k| hadamard(i, cols[k]));
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let target: Vec<f64> = (0..n).map(|_| if rng.random_bool(0.5) { 1.0 } else { -1.0 }).collect();
        let base = lambda_heuristic(&target, &design).unwrap();
        let mut last = usize::MAX;
        for scale in [0.5, 1.0, 2.0, 4.0, 50.0, 100.0] {
            let p = LassoProblem::new(design.clone(), target.clone(), base * scale).unwrap();
            let s = admm_lasso(&p, &AdmmSettings::default()).unwrap();
            let nnz = s.z.iter().filter(|&&v| v != 0.0).count();
            prop_assert!(nnz <= last, "scale {scale}: {nnz} > {last}");
            last = nnz;
        }
    }

    #[test]
    fn collaboration_matrix_is_exact(seed in any::<u64>(), q in 2usize..8, alpha in 0.0f64..=1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = Matrix::from_fn(q, q, |i, j| if i == j { 0.0 } else { rng.random_range(-1.0..1.0) });
        let model = build_collaboration_matrix(s.clone(), alpha).unwrap();
        let expected = Matrix::from_fn(q, q, |i, j| {
            let id = if i == j { 1.0 } else { 0.0 };
            (1.0 - alpha) * id + alpha * s[(i, j)]
        });
        prop_assert!(model.g_matrix().sub(&expected).unwrap().max_abs() <= 1e-15);
    }
}

/// On correlated designs the support can grow with lambda: here a coefficient
/// is zero at the heuristic lambda and nonzero at twice that. The oracle
/// agrees, so this is a property of the lasso path, not of the solver.
#[test]
fn support_can_grow_with_lambda_on_correlated_labels() {
    let mut rng = ChaCha8Rng::seed_from_u64(6474782343151701306);
    let labels = random_labels(&mut rng, 20, 8);
    let base = LassoProblem::for_label(&labels, 1, None).unwrap();
    let support = |scale: f64| {
        let p = LassoProblem::for_label(&labels, 1, Some(base.lambda() * scale)).unwrap();
        let admm = admm_lasso(&p, &AdmmSettings::default()).unwrap();
        let cd = lasso_coordinate_descent(p.design(), p.target(), p.lambda(), 1e-14, 1_000_000);
        let nz = |w: &[f64]| w.iter().map(|&v| v != 0.0).collect::<Vec<_>>();
        assert_eq!(nz(&admm.z), nz(&cd.coeffs));
        nz(&admm.z)
    };
    let (at_1, at_2) = (support(1.0), support(2.0));
    assert!(!at_1[6] && at_2[6]);
}

#[test]
fn learned_matrix_has_zero_diagonal_and_is_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let labels = random_labels(&mut rng, 40, 6);
    let settings = CorrelationSettings::default();
    let a = learn_correlation_matrix(&labels, &settings).unwrap();
    let b = learn_correlation_matrix(&labels, &settings).unwrap();
    assert_eq!(a.s_matrix, b.s_matrix);
    for i in 0..6 {
        assert_eq!(a.s_matrix[(i, i)], 0.0);
    }
    assert!(a.all_converged());
    let fixed = CorrelationSettings {
        lambda: LambdaRule::Fixed(1e6),
        ..settings
    };
    let empty = learn_correlation_matrix(&labels, &fixed).unwrap();
    assert_eq!(empty.s_matrix.max_abs(), 0.0);
}

#[test]
fn invalid_inputs_are_rejected() {
    assert!(soft_threshold(1.0, -0.1).is_err());
    assert!(build_collaboration_matrix(Matrix::identity(3), 0.5).is_err());
    assert!(build_collaboration_matrix(Matrix::zeros(3, 3), 1.5).is_err());
    let bad = AdmmSettings {
        rho: 0.0,
        ..AdmmSettings::default()
    };
    assert!(bad.validate().is_err());
}
