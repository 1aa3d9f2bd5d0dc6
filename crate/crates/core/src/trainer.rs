//! Model fitting by alternating closed-form updates, and prediction.
//!
//! The training objective over the embedding `Z`, dual coefficients `A` and
//! bias `b` is
//!
//! ```text
//! (1/2)||Z - T||^2 + (lambda1/2)||Z G - Y||^2 + (lambda2/2)||W||^2
//! T = (1/lambda2) K A + 1 bᵀ,   ||W||^2 = trace(Aᵀ K A) / lambda2^2
//! ```
//!
//! where `W` is never formed. Each outer iteration minimizes exactly over
//! `(b, A)` with `Z` fixed and then over `Z` with `(b, A)` fixed, so the
//! objective never increases. Both subproblems reuse a Cholesky factor that
//! is computed once per fit: `H = K / lambda2 + I` for the model step and
//! `I + lambda1 G Gᵀ` for the embedding step.

use serde::Serialize;

use crate::correlation::{
    build_collaboration_matrix, learn_correlation_matrix, CorrelationFit, CorrelationModel,
    CorrelationSettings,
};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::kernel::{cross_kernel, kernel_matrix, KernelSpec};
use crate::linalg::{dot, Cholesky, Matrix};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TrainerConfig<T> {
    /// Weight of the correlation-fit term.
    pub lambda1: T,
    /// Weight of the model-complexity term.
    pub lambda2: T,
    /// Collaboration degree in `[0, 1]`.
    pub alpha: T,
    /// Stop once the Frobenius change of `Z` drops below this.
    pub outer_tol: T,
    pub max_outer_iter: usize,
    pub correlation: CorrelationSettings<T>,
}

impl<T: Scalar> Default for TrainerConfig<T> {
    fn default() -> Self {
        Self {
            lambda1: T::one(),
            lambda2: T::lit(0.1),
            alpha: T::lit(0.5),
            outer_tol: T::lit(1e-6),
            max_outer_iter: 50,
            correlation: CorrelationSettings::default(),
        }
    }
}

impl<T: Scalar> TrainerConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda1 > T::zero()) || !self.lambda1.is_finite() {
            return Err(Error::param("lambda1", "must be positive and finite"));
        }
        if !(self.lambda2 > T::zero()) || !self.lambda2.is_finite() {
            return Err(Error::param("lambda2", "must be positive and finite"));
        }
        if !(self.alpha >= T::zero() && self.alpha <= T::one()) {
            return Err(Error::param("alpha", "must lie in [0, 1]"));
        }
        if !(self.outer_tol > T::zero()) {
            return Err(Error::param("outer_tol", "must be positive"));
        }
        if self.max_outer_iter == 0 {
            return Err(Error::param("max_outer_iter", "must be at least 1"));
        }
        self.correlation.admm.validate()
    }
}

/// Gram matrix with the factorization of `H = K / lambda2 + I`.
///
/// Depends only on the training features and `lambda2`, so it can be shared
/// by every fit that varies `alpha` or `lambda1`.
#[derive(Clone, Debug)]
pub struct KernelSystem<T> {
    kernel: Matrix<T>,
    lambda2: T,
    h_factor: Cholesky<T>,
    h_inv_ones: Vec<T>,
    ones_h_inv_ones: T,
}

impl<T: Scalar> KernelSystem<T> {
    pub fn new(kernel: Matrix<T>, lambda2: T) -> Result<Self> {
        if !(lambda2 > T::zero()) || !lambda2.is_finite() {
            return Err(Error::param("lambda2", "must be positive and finite"));
        }
        if !kernel.is_square() {
            return Err(Error::shape(
                "kernel matrix",
                "square matrix",
                format!("{}x{}", kernel.nrows(), kernel.ncols()),
            ));
        }
        let n = kernel.nrows();
        let inv_l2 = T::one() / lambda2;
        let mut h = kernel.scale(inv_l2);
        for i in 0..n {
            h[(i, i)] += T::one();
        }
        let h_factor = Cholesky::factor(&h)?;
        let h_inv_ones = h_factor.solve_vec(&vec![T::one(); n])?;
        let ones_h_inv_ones = h_inv_ones.iter().copied().sum();
        Ok(Self {
            kernel,
            lambda2,
            h_factor,
            h_inv_ones,
            ones_h_inv_ones,
        })
    }

    pub fn kernel(&self) -> &Matrix<T> {
        &self.kernel
    }

    pub fn lambda2(&self) -> T {
        self.lambda2
    }

    pub fn n_instances(&self) -> usize {
        self.kernel.nrows()
    }

    /// Minimizer `(b, A)` of `(1/2)||Z - T||^2 + (lambda2/2)||W||^2` for fixed `Z`:
    /// `bᵀ = 1ᵀH⁻¹Z / 1ᵀH⁻¹1` and `A = H⁻¹(Z - 1bᵀ)`.
    pub fn solve_model_params(&self, embedding: &Matrix<T>) -> Result<(Vec<T>, Matrix<T>)> {
        let h_inv_z = self.h_factor.solve_columns(embedding)?;
        let bias: Vec<T> = h_inv_z
            .column_sums()
            .into_iter()
            .map(|s| s / self.ones_h_inv_ones)
            .collect();
        // H⁻¹(Z - 1bᵀ) = H⁻¹Z - (H⁻¹1) bᵀ
        let mut dual = h_inv_z;
        for (i, &hi) in self.h_inv_ones.iter().enumerate() {
            for (a, &b) in dual.row_mut(i).iter_mut().zip(&bias) {
                *a -= hi * b;
            }
        }
        Ok((bias, dual))
    }

    /// `(1/lambda2) K A + 1 bᵀ`.
    pub fn outputs(&self, dual: &Matrix<T>, bias: &[T]) -> Result<Matrix<T>> {
        let mut t = self.kernel.matmul(dual)?.scale(T::one() / self.lambda2);
        t.add_row_broadcast(bias);
        Ok(t)
    }
}

/// Solver for `min_Z (1/2)||Z - T||^2 + (lambda1/2)||Z G - Y||^2`, i.e.
/// `Z = (T + lambda1 Y Gᵀ)(I + lambda1 G Gᵀ)⁻¹`.
#[derive(Clone, Debug)]
pub struct EmbeddingSolver<T> {
    factor: Cholesky<T>,
    weighted_target: Matrix<T>,
}

impl<T: Scalar> EmbeddingSolver<T> {
    pub fn new(labels: &Matrix<T>, g_matrix: &Matrix<T>, lambda1: T) -> Result<Self> {
        let q = labels.ncols();
        if g_matrix.shape() != (q, q) {
            return Err(Error::shape(
                "collaboration matrix",
                format!("{q}x{q}"),
                format!("{}x{}", g_matrix.nrows(), g_matrix.ncols()),
            ));
        }
        let mut m = g_matrix.matmul_tr(g_matrix)?.scale(lambda1);
        for i in 0..q {
            m[(i, i)] += T::one();
        }
        let factor = Cholesky::factor(&m)?;
        let weighted_target = labels.matmul_tr(g_matrix)?.scale(lambda1);
        Ok(Self {
            factor,
            weighted_target,
        })
    }

    pub fn solve(&self, outputs: &Matrix<T>) -> Result<Matrix<T>> {
        let rhs = outputs.add(&self.weighted_target)?;
        self.factor.solve_rows(&rhs)
    }
}

/// Closed-form embedding update.
pub fn update_embedding<T: Scalar>(
    outputs: &Matrix<T>,
    labels: &Matrix<T>,
    g_matrix: &Matrix<T>,
    lambda1: T,
) -> Result<Matrix<T>> {
    if !(lambda1 > T::zero()) {
        return Err(Error::param("lambda1", "must be positive"));
    }
    EmbeddingSolver::new(labels, g_matrix, lambda1)?.solve(outputs)
}

/// Iterates of the alternating optimization.
#[derive(Clone, Debug)]
pub struct TrainerState<'a, T> {
    system: &'a KernelSystem<T>,
    /// `Z`
    pub embedding: Matrix<T>,
    /// `A`
    pub dual_coeffs: Matrix<T>,
    /// `b`
    pub bias: Vec<T>,
    /// `T`
    pub outputs: Matrix<T>,
    /// `E = Z - T`
    pub residual: Matrix<T>,
    pub delta_z_history: Vec<T>,
}

impl<'a, T: Scalar> TrainerState<'a, T> {
    /// Starts from `Z = Y` with a zero model.
    pub fn new(system: &'a KernelSystem<T>, labels: &Matrix<T>) -> Result<Self> {
        let (n, q) = labels.shape();
        if n != system.n_instances() {
            return Err(Error::shape("trainer state", system.n_instances(), n));
        }
        Ok(Self {
            system,
            embedding: labels.clone(),
            dual_coeffs: Matrix::zeros(n, q),
            bias: vec![T::zero(); q],
            outputs: Matrix::zeros(n, q),
            residual: labels.clone(),
            delta_z_history: Vec::new(),
        })
    }

    pub fn system(&self) -> &KernelSystem<T> {
        self.system
    }

    pub fn kernel(&self) -> &Matrix<T> {
        self.system.kernel()
    }

    pub fn update_model_params(&mut self) -> Result<()> {
        let (bias, dual) = self.system.solve_model_params(&self.embedding)?;
        self.bias = bias;
        self.dual_coeffs = dual;
        Ok(())
    }

    pub fn compute_outputs(&mut self) -> Result<()> {
        self.outputs = self.system.outputs(&self.dual_coeffs, &self.bias)?;
        self.residual = self.embedding.sub(&self.outputs)?;
        Ok(())
    }

    /// Replaces `Z` and returns `||Z_new - Z_old||_F`.
    pub fn update_embedding(&mut self, solver: &EmbeddingSolver<T>) -> Result<T> {
        let z = solver.solve(&self.outputs)?;
        let delta = z.sub(&self.embedding)?.frobenius_norm();
        self.embedding = z;
        self.residual = self.embedding.sub(&self.outputs)?;
        self.delta_z_history.push(delta);
        Ok(delta)
    }

    /// Value of the training objective at the current iterate.
    pub fn objective(&self, lambda1: T, labels: &Matrix<T>, g_matrix: &Matrix<T>) -> Result<T> {
        objective_value(self, lambda1, labels, g_matrix)
    }
}

/// `(1/2)||E||^2 + (lambda1/2)||Z G - Y||^2 + trace(Aᵀ K A) / (2 lambda2)`.
pub fn objective_value<T: Scalar>(
    state: &TrainerState<'_, T>,
    lambda1: T,
    labels: &Matrix<T>,
    g_matrix: &Matrix<T>,
) -> Result<T> {
    let half = T::lit(0.5);
    let fit = state.residual.frobenius_norm_sq();
    let corr = state.embedding.matmul(g_matrix)?.sub(labels)?.frobenius_norm_sq();
    let ka = state.kernel().matmul(&state.dual_coeffs)?;
    let quad = dot(state.dual_coeffs.as_slice(), ka.as_slice());
    let value = half * fit + half * lambda1 * corr + half * quad / state.system.lambda2();
    if !value.is_finite() {
        return Err(Error::Divergence {
            iteration: state.delta_z_history.len(),
            message: "objective is not finite".into(),
        });
    }
    Ok(value)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FitDiagnostics<T> {
    pub outer_iterations: usize,
    pub converged: bool,
    /// `||Z_t - Z_{t-1}||_F` per outer iteration.
    pub delta_z_history: Vec<T>,
    /// Objective at the start, then after every outer iteration.
    pub objective_history: Vec<T>,
}

/// A fitted model: everything needed to score new instances.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainedModel<T> {
    dual_coeffs: Matrix<T>,
    bias: Vec<T>,
    kernel: KernelSpec<T>,
    train_features: Matrix<T>,
    correlation: CorrelationModel<T>,
    config: TrainerConfig<T>,
    diagnostics: FitDiagnostics<T>,
}

impl<T: Scalar> TrainedModel<T> {
    /// Assembles a model from stored parts, checking shapes.
    pub fn from_parts(
        dual_coeffs: Matrix<T>,
        bias: Vec<T>,
        kernel: KernelSpec<T>,
        train_features: Matrix<T>,
        correlation: CorrelationModel<T>,
        config: TrainerConfig<T>,
        diagnostics: FitDiagnostics<T>,
    ) -> Result<Self> {
        let (n, q) = dual_coeffs.shape();
        if train_features.nrows() != n {
            return Err(Error::shape("model training features", n, train_features.nrows()));
        }
        if bias.len() != q {
            return Err(Error::shape("model bias", q, bias.len()));
        }
        if correlation.n_labels() != q {
            return Err(Error::shape("model collaboration matrix", q, correlation.n_labels()));
        }
        config.validate()?;
        Ok(Self {
            dual_coeffs,
            bias,
            kernel,
            train_features,
            correlation,
            config,
            diagnostics,
        })
    }

    pub fn dual_coeffs(&self) -> &Matrix<T> {
        &self.dual_coeffs
    }

    pub fn bias(&self) -> &[T] {
        &self.bias
    }

    pub fn kernel(&self) -> &KernelSpec<T> {
        &self.kernel
    }

    pub fn train_features(&self) -> &Matrix<T> {
        &self.train_features
    }

    pub fn correlation(&self) -> &CorrelationModel<T> {
        &self.correlation
    }

    pub fn config(&self) -> &TrainerConfig<T> {
        &self.config
    }

    pub fn diagnostics(&self) -> &FitDiagnostics<T> {
        &self.diagnostics
    }

    pub fn n_labels(&self) -> usize {
        self.bias.len()
    }

    pub fn n_features(&self) -> usize {
        self.train_features.ncols()
    }

    /// Kernel model outputs before label collaboration:
    /// `(1/lambda2) Σ_i k(x, x_i) a_i + b` per test row.
    pub fn raw_outputs(&self, test: &Matrix<T>) -> Result<Matrix<T>> {
        if test.ncols() != self.n_features() {
            return Err(Error::shape(
                "prediction features",
                format!("{} columns", self.n_features()),
                format!("{} columns", test.ncols()),
            ));
        }
        let k_test = cross_kernel(&self.train_features, test, &self.kernel)?;
        let mut raw = k_test
            .matmul(&self.dual_coeffs)?
            .scale(T::one() / self.config.lambda2);
        raw.add_row_broadcast(&self.bias);
        Ok(raw)
    }

    /// Real-valued label scores, `raw_outputs · G`.
    pub fn predict_scores(&self, test: &Matrix<T>) -> Result<Matrix<T>> {
        self.raw_outputs(test)?.matmul(self.correlation.g_matrix())
    }

    /// Sign of the scores, with `sign(0) = -1`.
    pub fn predict_labels(&self, test: &Matrix<T>) -> Result<Matrix<T>> {
        Ok(sign_labels(&self.predict_scores(test)?))
    }
}

pub fn sign_labels<T: Scalar>(scores: &Matrix<T>) -> Matrix<T> {
    scores.map(|s| if s > T::zero() { T::one() } else { -T::one() })
}

/// Runs the alternating optimization on a prepared kernel system.
pub fn fit_with_system<T: Scalar>(
    system: &KernelSystem<T>,
    kernel: KernelSpec<T>,
    features: &Matrix<T>,
    labels: &Matrix<T>,
    correlation: &CorrelationModel<T>,
    config: &TrainerConfig<T>,
) -> Result<TrainedModel<T>> {
    config.validate()?;
    if (system.lambda2() - config.lambda2).abs() > T::zero() {
        return Err(Error::param("lambda2", "kernel system was built for a different lambda2"));
    }
    if features.nrows() != labels.nrows() {
        return Err(Error::shape("training rows", features.nrows(), labels.nrows()));
    }
    let n = labels.nrows();
    if n < 2 {
        return Err(Error::InvalidInput(format!(
            "training needs at least two instances, found {n}"
        )));
    }
    let g = correlation.g_matrix();
    let solver = EmbeddingSolver::new(labels, g, config.lambda1)?;
    let mut state = TrainerState::new(system, labels)?;
    let mut objective_history = vec![state.objective(config.lambda1, labels, g)?];
    let mut converged = false;

    for iteration in 1..=config.max_outer_iter {
        state.update_model_params()?;
        state.compute_outputs()?;
        let delta = state.update_embedding(&solver)?;
        if !delta.is_finite() || !state.embedding.is_finite() {
            return Err(Error::Divergence {
                iteration,
                message: "embedding contains non-finite values".into(),
            });
        }
        let objective = state.objective(config.lambda1, labels, g).map_err(|e| match e {
            Error::Divergence { message, .. } => Error::Divergence { iteration, message },
            other => other,
        })?;
        objective_history.push(objective);
        if delta < config.outer_tol {
            converged = true;
            break;
        }
    }

    let diagnostics = FitDiagnostics {
        outer_iterations: state.delta_z_history.len(),
        converged,
        delta_z_history: state.delta_z_history,
        objective_history,
    };
    TrainedModel::from_parts(
        state.dual_coeffs,
        state.bias,
        kernel,
        features.clone(),
        correlation.clone(),
        *config,
        diagnostics,
    )
}

/// Fits a model for a given correlation model. The kernel bandwidth is the
/// mean pairwise distance of the training features.
pub fn fit<T: Scalar>(
    dataset: &Dataset<T>,
    correlation: &CorrelationModel<T>,
    config: &TrainerConfig<T>,
) -> Result<TrainedModel<T>> {
    config.validate()?;
    let features = dataset.features();
    let spec = KernelSpec::from_features(features)?;
    let system = KernelSystem::new(kernel_matrix(features, &spec), config.lambda2)?;
    fit_with_system(&system, spec, features, dataset.labels(), correlation, config)
}

/// Learns the label correlations and fits the model on the same data.
pub fn train<T: Scalar>(
    dataset: &Dataset<T>,
    config: &TrainerConfig<T>,
) -> Result<(TrainedModel<T>, CorrelationFit<T>)> {
    config.validate()?;
    let corr_fit = learn_correlation_matrix(dataset.labels(), &config.correlation)?;
    let correlation = build_collaboration_matrix(corr_fit.s_matrix.clone(), config.alpha)?;
    let model = fit(dataset, &correlation, config)?;
    Ok((model, corr_fit))
}
