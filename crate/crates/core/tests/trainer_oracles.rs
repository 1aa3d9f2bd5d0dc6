use camel::correlation::{build_collaboration_matrix, CorrelationModel};
use camel::kernel::{gaussian_bandwidth, kernel_matrix, KernelSpec};
use camel::oracle::{dense_ridge_solve, gaussian_kernel_entry, mean_pairwise_distance};
use camel::synthetic::{make_multilabel, SyntheticConfig};
use camel::trainer::{fit, update_embedding, EmbeddingSolver, TrainerState};
use camel::{train, Dataset, KernelSystem, Matrix, TrainerConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn gaussian(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Matrix<f64> {
    Matrix::from_fn(n, d, |_, _| rng.sample(StandardNormal))
}

fn signs(rng: &mut ChaCha8Rng, n: usize, q: usize) -> Matrix<f64> {
    Matrix::from_fn(n, q, |_, _| if rng.random_bool(0.4) { 1.0 } else { -1.0 })
}

fn oracle_kernel(x: &Matrix<f64>, sigma: f64) -> Matrix<f64> {
    Matrix::from_fn(x.nrows(), x.nrows(), |i, j| gaussian_kernel_entry(x.row(i), x.row(j), sigma))
}

fn random_g(rng: &mut ChaCha8Rng, q: usize, alpha: f64) -> Matrix<f64> {
    let s = Matrix::from_fn(q, q, |i, j| if i == j { 0.0 } else { rng.random_range(-0.5..0.5) });
    build_collaboration_matrix(s, alpha).unwrap().g_matrix().clone()
}

fn data(n: usize, seed: u64) -> Dataset<f64> {
    make_multilabel(&SyntheticConfig {
        n,
        d: 5,
        q: 4,
        seed,
        ..Default::default()
    })
    .unwrap()
}

#[test]
fn kernel_and_bandwidth_match_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..10 {
        let n = rng.random_range(2..40);
        let d = rng.random_range(1..6);
        let x = gaussian(&mut rng, n, d);
        let sigma = gaussian_bandwidth(&x).unwrap();
        assert!((sigma - mean_pairwise_distance(&x)).abs() <= 1e-12 * sigma);
        let k = kernel_matrix(&x, &KernelSpec::new(sigma).unwrap());
        assert!(k.sub(&oracle_kernel(&x, sigma)).unwrap().max_abs() <= 1e-14);
    }
}

#[test]
fn model_params_match_dense_ridge_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for case in 0..20 {
        let n = rng.random_range(2..=50);
        let q = rng.random_range(2..6);
        let lambda2 = [1e-3, 1e-2, 0.1, 1.0][case % 4];
        let x = gaussian(&mut rng, n, 3);
        let k = oracle_kernel(&x, mean_pairwise_distance(&x));
        let z = Matrix::from_fn(n, q, |_, _| rng.random_range(-1.5..1.5));
        let system = KernelSystem::new(k.clone(), lambda2).unwrap();
        let (bias, dual) = system.solve_model_params(&z).unwrap();
        for j in 0..q {
            let (a, b) = dense_ridge_solve(&k, &z.column(j), lambda2);
            assert!((bias[j] - b).abs() <= 1e-8, "case {case}: bias {} vs {b}", bias[j]);
            for i in 0..n {
                assert!((dual[(i, j)] - a[i]).abs() <= 1e-8, "case {case}");
            }
        }
        for s in dual.column_sums() {
            assert!(s.abs() <= 1e-8);
        }
    }
}

#[test]
fn single_instance_model_params() {
    let system = KernelSystem::new(Matrix::identity(1), 0.1).unwrap();
    let z = Matrix::from_rows(&[vec![1.0, -1.0, 0.25]]).unwrap();
    let (bias, dual) = system.solve_model_params(&z).unwrap();
    assert_eq!(bias, vec![1.0, -1.0, 0.25]);
    assert!(dual.max_abs() <= 1e-15);
    let (a, b) = dense_ridge_solve(&Matrix::identity(1), &[0.7], 0.1);
    assert_eq!((a, b), (vec![0.0], 0.7));
}

#[test]
fn embedding_update_is_stationary() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..20 {
        let n = rng.random_range(2..40);
        let q = rng.random_range(2..8);
        let lambda1 = [0.1, 1.0, 10.0][rng.random_range(0..3)];
        let y = signs(&mut rng, n, q);
        let t = Matrix::from_fn(n, q, |_, _| rng.random_range(-2.0..2.0));
        let alpha = rng.random_range(0.0..1.0);
        let g = random_g(&mut rng, q, alpha);
        let z = update_embedding(&t, &y, &g, lambda1).unwrap();
        let grad = z
            .sub(&t)
            .unwrap()
            .add(&z.matmul(&g).unwrap().sub(&y).unwrap().matmul_tr(&g).unwrap().scale(lambda1))
            .unwrap();
        assert!(grad.max_abs() <= 1e-8, "{}", grad.max_abs());
    }
}

#[test]
fn state_invariants_and_objective_terms() {
    let ds = data(40, 4);
    let (x, y) = (ds.features(), ds.labels());
    let spec = KernelSpec::from_features(x).unwrap();
    let k = kernel_matrix(x, &spec);
    let (lambda1, lambda2) = (1.0, 0.1);
    let system = KernelSystem::new(k.clone(), lambda2).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let g = random_g(&mut rng, 4, 0.2);
    let solver = EmbeddingSolver::new(y, &g, lambda1).unwrap();
    let mut state = TrainerState::new(&system, y).unwrap();
    assert_eq!(&state.embedding, y);
    let mut last = state.objective(lambda1, y, &g).unwrap();
    for _ in 0..10 {
        state.update_model_params().unwrap();
        for s in state.dual_coeffs.column_sums() {
            assert!(s.abs() <= 1e-8);
        }
        state.compute_outputs().unwrap();
        state.update_embedding(&solver).unwrap();
        let identity = state.embedding.sub(&state.outputs).unwrap().sub(&state.residual).unwrap();
        assert!(identity.max_abs() <= 1e-12);

        // objective by direct loops over its three terms
        let (n, q) = y.shape();
        let mut fit_term = 0.0;
        let mut corr_term = 0.0;
        let mut reg_term = 0.0;
        for i in 0..n {
            for j in 0..q {
                fit_term += state.residual[(i, j)].powi(2);
                let zg: f64 = (0..q).map(|l| state.embedding[(i, l)] * g[(l, j)]).sum();
                corr_term += (zg - y[(i, j)]).powi(2);
            }
        }
        for j in 0..q {
            for i in 0..n {
                for l in 0..n {
                    reg_term += state.dual_coeffs[(i, j)] * k[(i, l)] * state.dual_coeffs[(l, j)];
                }
            }
        }
        let direct = 0.5 * fit_term + 0.5 * lambda1 * corr_term + 0.5 * reg_term / lambda2;
        let value = state.objective(lambda1, y, &g).unwrap();
        assert!((value - direct).abs() <= 1e-9 * direct.max(1.0));
        assert!(value <= last + 1e-9);
        last = value;
    }
}

#[test]
fn fit_objective_is_monotone() {
    let ds = data(60, 6);
    for alpha in [0.0, 0.1, 0.5, 1.0] {
        let config = TrainerConfig {
            alpha,
            ..TrainerConfig::default()
        };
        let (model, _) = train(&ds, &config).unwrap();
        let h = &model.diagnostics().objective_history;
        assert_eq!(h.len(), model.diagnostics().outer_iterations + 1);
        for w in h.windows(2) {
            assert!(w[1] <= w[0] + 1e-9, "alpha {alpha}: {} -> {}", w[0], w[1]);
        }
    }
}

#[test]
fn alpha_zero_reduces_to_independent_kernel_ridge() {
    let train_ds = data(40, 7);
    let test_ds = data(15, 8);
    let lambda2 = 0.1;
    let config = TrainerConfig {
        alpha: 0.0,
        lambda1: 1e6,
        lambda2,
        ..TrainerConfig::default()
    };
    let correlation = CorrelationModel::independent(4);
    let model = fit(&train_ds, &correlation, &config).unwrap();
    let raw = model.raw_outputs(test_ds.features()).unwrap();

    let x = train_ds.features();
    let sigma = mean_pairwise_distance(x);
    let k = oracle_kernel(x, sigma);
    for j in 0..4 {
        let (a, b) = dense_ridge_solve(&k, &train_ds.labels().column(j), lambda2);
        for r in 0..test_ds.n_instances() {
            let xr = test_ds.features().row(r);
            let f: f64 = (0..x.nrows())
                .map(|i| a[i] * gaussian_kernel_entry(xr, x.row(i), sigma))
                .sum::<f64>()
                / lambda2
                + b;
            assert!((raw[(r, j)] - f).abs() <= 1e-4, "label {j} row {r}: {} vs {f}", raw[(r, j)]);
        }
    }
    // with G = I, scores are the raw outputs
    assert_eq!(model.predict_scores(test_ds.features()).unwrap(), raw);
}

#[test]
fn label_permutation_permutes_scores() {
    let ds = data(50, 9);
    let test = data(10, 10);
    let perm = vec![2, 0, 3, 1];
    let permuted = Dataset::new(ds.features().clone(), ds.labels().select_columns(&perm), None).unwrap();
    let config = TrainerConfig {
        alpha: 0.3,
        ..TrainerConfig::default()
    };
    let (a, _) = train(&ds, &config).unwrap();
    let (b, _) = train(&permuted, &config).unwrap();
    let sa = a.predict_scores(test.features()).unwrap().select_columns(&perm);
    let sb = b.predict_scores(test.features()).unwrap();
    assert!(sa.sub(&sb).unwrap().max_abs() <= 1e-10, "{}", sa.sub(&sb).unwrap().max_abs());
}

#[test]
fn f32_pipeline_agrees_with_f64() {
    let ds64 = data(40, 11);
    let ds32: Dataset<f32> = make_multilabel(&SyntheticConfig {
        n: 40,
        d: 5,
        q: 4,
        seed: 11,
        ..Default::default()
    })
    .unwrap();
    let config = TrainerConfig {
        alpha: 0.1,
        ..TrainerConfig::default()
    };
    let config32 = TrainerConfig::<f32> {
        alpha: 0.1,
        outer_tol: 1e-4,
        correlation: camel::CorrelationSettings {
            admm: camel::AdmmSettings {
                tol_abs: 1e-5,
                tol_rel: 1e-5,
                ..Default::default()
            },
            ..Default::default()
        },
        ..TrainerConfig::default()
    };
    let (m64, _) = train(&ds64, &config).unwrap();
    let (m32, _) = train(&ds32, &config32).unwrap();
    let p64 = m64.predict_labels(ds64.features()).unwrap();
    let p32 = m32.predict_labels(ds32.features()).unwrap();
    let agree = p64
        .as_slice()
        .iter()
        .zip(p32.as_slice())
        .filter(|(a, b)| **a as f32 == **b)
        .count();
    assert!(agree as f64 >= 0.95 * p64.as_slice().len() as f64);
}

#[test]
fn predictions_use_sign_with_zero_negative() {
    let ds = data(30, 12);
    let (model, _) = train(&ds, &TrainerConfig::default()).unwrap();
    let scores = model.predict_scores(ds.features()).unwrap();
    let labels = model.predict_labels(ds.features()).unwrap();
    for (s, l) in scores.as_slice().iter().zip(labels.as_slice()) {
        assert_eq!(*l, if *s > 0.0 { 1.0 } else { -1.0 });
    }
    assert!(model.predict_scores(&Matrix::zeros(2, 3)).is_err());
}
