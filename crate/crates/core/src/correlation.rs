//! Label correlation learning.
//!
//! Each label column `y_j` is reconstructed from the remaining columns by an
//! l1-regularized least-squares fit
//!
//! ```text
//! minimize_w  (1/2) ||Y_{-j} w - y_j||^2 + lambda ||w||_1
//! ```
//!
//! solved with scaled-dual ADMM on the split `w = z`. The sparse iterate `z`
//! is reported as the solution and scattered into column `j` of the
//! correlation matrix `S`, whose diagonal is zero.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{norm2, Cholesky, Matrix};
use crate::scalar::Scalar;

/// Proximal operator of `omega * |.|`.
pub fn soft_threshold<T: Scalar>(a: T, omega: T) -> Result<T> {
    if !(omega >= T::zero()) {
        return Err(Error::param("omega", "threshold must be nonnegative"));
    }
    Ok(shrink(a, omega))
}

/// Elementwise [`soft_threshold`].
pub fn soft_threshold_vec<T: Scalar>(values: &[T], omega: T) -> Result<Vec<T>> {
    if !(omega >= T::zero()) {
        return Err(Error::param("omega", "threshold must be nonnegative"));
    }
    Ok(values.iter().map(|&a| shrink(a, omega)).collect())
}

#[inline]
fn shrink<T: Scalar>(a: T, omega: T) -> T {
    (a - omega).max(T::zero()) - (-a - omega).max(T::zero())
}

/// `max_k |y_jᵀ Y_{-j}[:, k]| / 100`.
pub fn lambda_heuristic<T: Scalar>(target: &[T], design: &Matrix<T>) -> Result<T> {
    let corr = design.tr_matvec(target)?;
    let max = corr
        .iter()
        .fold(T::zero(), |acc, &c| if c.abs() > acc { c.abs() } else { acc });
    Ok(max / T::lit(100.0))
}

#[derive(Clone, Debug)]
pub struct LassoProblem<T> {
    design: Matrix<T>,
    target: Vec<T>,
    lambda: T,
}

impl<T: Scalar> LassoProblem<T> {
    pub fn new(design: Matrix<T>, target: Vec<T>, lambda: T) -> Result<Self> {
        if design.nrows() != target.len() {
            return Err(Error::shape(
                "lasso problem",
                format!("target of length {}", design.nrows()),
                format!("length {}", target.len()),
            ));
        }
        if !(lambda >= T::zero()) || !lambda.is_finite() {
            return Err(Error::param("lambda", "must be finite and nonnegative"));
        }
        Ok(Self {
            design,
            target,
            lambda,
        })
    }

    /// Problem for label column `j`: the other columns reconstruct column `j`.
    pub fn for_label(labels: &Matrix<T>, j: usize, lambda: Option<T>) -> Result<Self> {
        let q = labels.ncols();
        if j >= q {
            return Err(Error::param("j", format!("label index {j} out of range for {q} labels")));
        }
        let others: Vec<usize> = (0..q).filter(|&k| k != j).collect();
        let design = labels.select_columns(&others);
        let target = labels.column(j);
        let lambda = match lambda {
            Some(l) => l,
            None => lambda_heuristic(&target, &design)?,
        };
        Self::new(design, target, lambda)
    }

    pub fn design(&self) -> &Matrix<T> {
        &self.design
    }

    pub fn target(&self) -> &[T] {
        &self.target
    }

    pub fn lambda(&self) -> T {
        self.lambda
    }

    pub fn n_coeffs(&self) -> usize {
        self.design.ncols()
    }

    /// `(1/2)||A w - b||^2 + lambda ||w||_1`.
    pub fn objective(&self, w: &[T]) -> Result<T> {
        let fitted = self.design.matvec(w)?;
        let half = T::lit(0.5);
        let resid: T = fitted
            .iter()
            .zip(&self.target)
            .map(|(&f, &b)| (f - b) * (f - b))
            .sum();
        let l1: T = w.iter().map(|x| x.abs()).sum();
        Ok(half * resid + self.lambda * l1)
    }

    /// Gradient of the smooth part, `Aᵀ(A w - b)`.
    pub fn smooth_gradient(&self, w: &[T]) -> Result<Vec<T>> {
        let mut r = self.design.matvec(w)?;
        for (ri, &b) in r.iter_mut().zip(&self.target) {
            *ri -= b;
        }
        self.design.tr_matvec(&r)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AdmmSettings<T> {
    pub rho: T,
    pub tol_abs: T,
    pub tol_rel: T,
    pub max_iter: usize,
}

impl<T: Scalar> Default for AdmmSettings<T> {
    fn default() -> Self {
        Self {
            rho: T::one(),
            tol_abs: T::lit(1e-8),
            tol_rel: T::lit(1e-8),
            max_iter: 1000,
        }
    }
}

impl<T: Scalar> AdmmSettings<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho > T::zero()) || !self.rho.is_finite() {
            return Err(Error::param("rho", "penalty must be positive and finite"));
        }
        if !(self.tol_abs >= T::zero()) || !(self.tol_rel >= T::zero()) {
            return Err(Error::param("tol", "tolerances must be nonnegative"));
        }
        if self.max_iter == 0 {
            return Err(Error::param("max_iter", "must be at least 1"));
        }
        Ok(())
    }
}

/// Solver state after the last ADMM iteration.
#[derive(Clone, Debug)]
pub struct AdmmState<T> {
    /// Least-squares iterate `S_j`.
    pub coeffs: Vec<T>,
    /// Sparse iterate; this is the reported solution.
    pub z: Vec<T>,
    /// Scaled dual variable (multiplier divided by `rho`).
    pub mu: Vec<T>,
    pub rho: T,
    pub primal_residual: T,
    pub dual_residual: T,
    pub iterations: usize,
    pub converged: bool,
    /// `rho (||z_k - z_{k-1}||^2 + ||mu_k - mu_{k-1}||^2)` per iteration.
    /// This quantity is non-increasing for ADMM.
    pub merit_history: Vec<T>,
}

/// Scaled-dual ADMM for the lasso. Non-convergence within `max_iter` is
/// reported through `converged`, not as an error.
pub fn admm_lasso<T: Scalar>(problem: &LassoProblem<T>, settings: &AdmmSettings<T>) -> Result<AdmmState<T>> {
    settings.validate()?;
    let p = problem.n_coeffs();
    let rho = settings.rho;
    let lambda = problem.lambda();
    let threshold = lambda / rho;

    // (AᵀA + rho I) does not change between iterations: factor once.
    let mut normal = problem.design().tr_matmul(problem.design())?;
    for i in 0..p {
        normal[(i, i)] += rho;
    }
    let factor = Cholesky::factor(&normal)?;
    let atb = problem.design().tr_matvec(problem.target())?;

    let sqrt_p = T::from_count(p).sqrt();
    let mut x = vec![T::zero(); p];
    let mut z = vec![T::zero(); p];
    let mut mu = vec![T::zero(); p];
    let mut z_prev = vec![T::zero(); p];
    let mut rhs = vec![T::zero(); p];
    let mut merit_history = Vec::new();
    let mut primal = T::zero();
    let mut dual = T::zero();
    let mut converged = false;
    let mut iterations = 0;

    for iter in 1..=settings.max_iter {
        iterations = iter;
        for i in 0..p {
            rhs[i] = atb[i] + rho * (z[i] - mu[i]);
        }
        factor.solve_in_place(&mut rhs);
        x.copy_from_slice(&rhs);

        z_prev.copy_from_slice(&z);
        for i in 0..p {
            z[i] = shrink(x[i] + mu[i], threshold);
        }

        let mut dmu_sq = T::zero();
        let mut r_sq = T::zero();
        let mut dz_sq = T::zero();
        for i in 0..p {
            let r = x[i] - z[i];
            mu[i] += r;
            // the scaled dual moves by exactly the primal residual
            dmu_sq += r * r;
            r_sq += r * r;
            let dz = z[i] - z_prev[i];
            dz_sq += dz * dz;
        }
        primal = r_sq.sqrt();
        dual = rho * dz_sq.sqrt();
        merit_history.push(rho * (dz_sq + dmu_sq));

        let eps_primal = sqrt_p * settings.tol_abs + settings.tol_rel * norm2(&x).max(norm2(&z));
        let eps_dual = sqrt_p * settings.tol_abs + settings.tol_rel * rho * norm2(&mu);
        if primal <= eps_primal && dual <= eps_dual {
            converged = true;
            break;
        }
    }

    Ok(AdmmState {
        coeffs: x,
        z,
        mu,
        rho,
        primal_residual: primal,
        dual_residual: dual,
        iterations,
        converged,
        merit_history,
    })
}

/// How the per-label sparsity weight is chosen.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum LambdaRule<T> {
    /// `max |y_jᵀ Y_{-j}| / 100` per label, scaled by the given factor.
    Heuristic { scale: T },
    /// Same weight for every label.
    Fixed(T),
}

impl<T: Scalar> Default for LambdaRule<T> {
    fn default() -> Self {
        LambdaRule::Heuristic { scale: T::one() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CorrelationSettings<T> {
    pub admm: AdmmSettings<T>,
    pub lambda: LambdaRule<T>,
}

impl<T: Scalar> Default for CorrelationSettings<T> {
    fn default() -> Self {
        Self {
            admm: AdmmSettings::default(),
            lambda: LambdaRule::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ColumnDiagnostics {
    pub label: usize,
    pub lambda: f64,
    pub iterations: usize,
    pub converged: bool,
    pub primal_residual: f64,
    pub dual_residual: f64,
    /// Column is all +1 or all -1.
    pub constant_label: bool,
    pub nonzeros: usize,
}

#[derive(Clone, Debug)]
pub struct CorrelationFit<T> {
    pub s_matrix: Matrix<T>,
    pub columns: Vec<ColumnDiagnostics>,
}

impl<T> CorrelationFit<T> {
    pub fn all_converged(&self) -> bool {
        self.columns.iter().all(|c| c.converged)
    }
}

/// Solves the reconstruction problem for every label (in parallel on the
/// current rayon pool) and assembles `S` with a zero diagonal.
pub fn learn_correlation_matrix<T: Scalar>(
    labels: &Matrix<T>,
    settings: &CorrelationSettings<T>,
) -> Result<CorrelationFit<T>> {
    let q = labels.ncols();
    if q < 2 {
        return Err(Error::InvalidInput(format!(
            "correlation learning needs at least two labels, found {q}"
        )));
    }
    settings.admm.validate()?;
    let solved: Vec<(Vec<T>, ColumnDiagnostics)> = (0..q)
        .into_par_iter()
        .map(|j| solve_column(labels, j, settings))
        .collect::<Result<_>>()?;

    let mut s_matrix = Matrix::zeros(q, q);
    let mut columns = Vec::with_capacity(q);
    for (j, (z, diag)) in solved.into_iter().enumerate() {
        let rows = (0..q).filter(|&i| i != j);
        for (i, v) in rows.zip(z) {
            s_matrix[(i, j)] = v;
        }
        columns.push(diag);
    }
    Ok(CorrelationFit { s_matrix, columns })
}

fn solve_column<T: Scalar>(
    labels: &Matrix<T>,
    j: usize,
    settings: &CorrelationSettings<T>,
) -> Result<(Vec<T>, ColumnDiagnostics)> {
    let problem = match settings.lambda {
        LambdaRule::Heuristic { scale } => {
            let base = LassoProblem::for_label(labels, j, None)?;
            let lambda = base.lambda() * scale;
            LassoProblem::new(base.design, base.target, lambda)?
        }
        LambdaRule::Fixed(l) => LassoProblem::for_label(labels, j, Some(l))?,
    };
    let state = admm_lasso(&problem, &settings.admm)?;
    let first = problem.target()[0];
    let constant_label = problem.target().iter().all(|&y| y == first);
    let diag = ColumnDiagnostics {
        label: j,
        lambda: problem.lambda().to_f64().unwrap_or(f64::NAN),
        iterations: state.iterations,
        converged: state.converged,
        primal_residual: state.primal_residual.to_f64().unwrap_or(f64::NAN),
        dual_residual: state.dual_residual.to_f64().unwrap_or(f64::NAN),
        constant_label,
        nonzeros: state.z.iter().filter(|&&v| v != T::zero()).count(),
    };
    Ok((state.z, diag))
}

/// `S`, the collaboration degree `alpha` and `G = (1 - alpha) I + alpha S`.
#[derive(Clone, Debug, PartialEq)]
pub struct CorrelationModel<T> {
    s_matrix: Matrix<T>,
    alpha: T,
    g_matrix: Matrix<T>,
}

impl<T: Scalar> CorrelationModel<T> {
    pub fn s_matrix(&self) -> &Matrix<T> {
        &self.s_matrix
    }

    pub fn alpha(&self) -> T {
        self.alpha
    }

    pub fn g_matrix(&self) -> &Matrix<T> {
        &self.g_matrix
    }

    pub fn n_labels(&self) -> usize {
        self.s_matrix.nrows()
    }

    /// Model with `G = I`: labels are predicted independently.
    pub fn independent(q: usize) -> Self {
        Self {
            s_matrix: Matrix::zeros(q, q),
            alpha: T::zero(),
            g_matrix: Matrix::identity(q),
        }
    }
}

pub fn build_collaboration_matrix<T: Scalar>(s_matrix: Matrix<T>, alpha: T) -> Result<CorrelationModel<T>> {
    if !s_matrix.is_square() {
        return Err(Error::shape(
            "correlation matrix",
            "square matrix",
            format!("{}x{}", s_matrix.nrows(), s_matrix.ncols()),
        ));
    }
    if !(alpha >= T::zero() && alpha <= T::one()) {
        return Err(Error::param("alpha", "collaboration degree must lie in [0, 1]"));
    }
    let q = s_matrix.nrows();
    if let Some(i) = (0..q).find(|&i| s_matrix[(i, i)] != T::zero()) {
        return Err(Error::InvalidInput(format!(
            "correlation matrix diagonal entry {i} is not zero"
        )));
    }
    let keep = T::one() - alpha;
    let g_matrix = Matrix::from_fn(q, q, |i, j| {
        let own = if i == j { keep } else { T::zero() };
        own + alpha * s_matrix[(i, j)]
    });
    Ok(CorrelationModel {
        s_matrix,
        alpha,
        g_matrix,
    })
}

/// Largest violation of the lasso optimality conditions at `w`:
/// `|g_i + lambda sign(w_i)|` on the support and `max(|g_i| - lambda, 0)` off it.
pub fn kkt_violation<T: Scalar>(problem: &LassoProblem<T>, w: &[T]) -> Result<T> {
    let grad = problem.smooth_gradient(w)?;
    let lambda = problem.lambda();
    Ok(grad.iter().zip(w).fold(T::zero(), |acc, (&g, &wi)| {
        let v = if wi == T::zero() {
            (g.abs() - lambda).max(T::zero())
        } else {
            (g + lambda * wi.signum()).abs()
        };
        acc.max(v)
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn soft_threshold_examples() {
        assert_eq!(soft_threshold(3.0, 1.0).unwrap(), 2.0);
        assert_eq!(soft_threshold(-0.5, 1.0).unwrap(), 0.0);
        assert_eq!(soft_threshold(-2.0, 0.5).unwrap(), -1.5);
        assert!(soft_threshold(1.0, -0.1).is_err());
        assert_eq!(
            soft_threshold_vec(&[3.0, -0.5, -2.0], 0.5).unwrap(),
            vec![2.5, 0.0, -1.5]
        );
    }

    #[test]
    fn heuristic_on_duplicate_column() {
        let y: Vec<f64> = (0..10).map(|i| if i % 3 == 0 { 1.0 } else { -1.0 }).collect();
        let other: Vec<f64> = (0..10).map(|i| if i < 5 { 1.0 } else { -1.0 }).collect();
        let design = Matrix::from_fn(10, 2, |i, j| if j == 0 { y[i] } else { other[i] });
        assert!((lambda_heuristic(&y, &design).unwrap() - 0.1).abs() < 1e-15);
    }

    #[test]
    fn heuristic_orthogonal_is_zero() {
        let y = vec![1.0, 1.0, -1.0, -1.0];
        let design = Matrix::from_rows(&[vec![1.0], vec![-1.0], vec![1.0], vec![-1.0]]).unwrap();
        assert_eq!(lambda_heuristic(&y, &design).unwrap(), 0.0);
    }

    #[test]
    fn zero_solution_above_lambda_max() {
        let labels = Matrix::from_rows(&[
            vec![1.0, 1.0, -1.0],
            vec![-1.0, 1.0, 1.0],
            vec![1.0, -1.0, 1.0],
            vec![1.0, 1.0, 1.0],
        ])
        .unwrap();
        let base = LassoProblem::for_label(&labels, 0, None).unwrap();
        let lmax = base
            .design()
            .tr_matvec(base.target())
            .unwrap()
            .iter()
            .fold(0.0f64, |a: f64, c: &f64| a.max(c.abs()));
        let p = LassoProblem::new(base.design().clone(), base.target().to_vec(), lmax).unwrap();
        let st = admm_lasso(&p, &AdmmSettings::default()).unwrap();
        assert!(st.z.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn scalar_closed_form() {
        let y: Vec<f64> = (0..10).map(|i| if i % 4 == 1 { 1.0 } else { -1.0 }).collect();
        let design = Matrix::column_vector(&y);
        let p = LassoProblem::new(design, y, 0.1).unwrap();
        let settings = AdmmSettings {
            tol_abs: 1e-12,
            tol_rel: 1e-12,
            max_iter: 10_000,
            ..Default::default()
        };
        let st = admm_lasso(&p, &settings).unwrap();
        assert!(st.converged);
        assert!((st.z[0] - 0.99).abs() < 1e-10, "z = {}", st.z[0]);
    }

    #[test]
    fn identical_columns_give_symmetric_s() {
        let col: Vec<f64> = (0..10).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let labels = Matrix::from_fn(10, 2, |i, _| col[i]);
        let settings = CorrelationSettings {
            admm: AdmmSettings {
                tol_abs: 1e-12,
                tol_rel: 1e-12,
                max_iter: 10_000,
                ..Default::default()
            },
            lambda: LambdaRule::Fixed(0.1),
        };
        let fit = learn_correlation_matrix(&labels, &settings).unwrap();
        let s = &fit.s_matrix;
        assert_eq!(s[(0, 0)], 0.0);
        assert_eq!(s[(1, 1)], 0.0);
        assert!((s[(0, 1)] - 0.99).abs() < 1e-10);
        assert!((s[(1, 0)] - 0.99).abs() < 1e-10);
    }

    #[test]
    fn constant_label_is_flagged() {
        let labels = Matrix::from_rows(&[
            vec![1.0, 1.0, -1.0],
            vec![1.0, -1.0, 1.0],
            vec![1.0, 1.0, 1.0],
        ])
        .unwrap();
        let fit = learn_correlation_matrix(&labels, &CorrelationSettings::default()).unwrap();
        assert!(fit.columns[0].constant_label);
        assert!(!fit.columns[1].constant_label);
    }

    #[test]
    fn collaboration_matrix_examples() {
        let s = Matrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let m = build_collaboration_matrix(s.clone(), 0.0).unwrap();
        assert_eq!(m.g_matrix(), &Matrix::identity(2));
        let m = build_collaboration_matrix(s.clone(), 1.0).unwrap();
        assert_eq!(m.g_matrix(), &s);
        let m = build_collaboration_matrix(s.clone(), 0.5).unwrap();
        assert!(m.g_matrix().as_slice().iter().all(|&g| g == 0.5));
        assert!(build_collaboration_matrix(s.clone(), 1.5).is_err());
        assert!(build_collaboration_matrix(s, -0.1).is_err());
        let bad = Matrix::identity(2);
        assert!(build_collaboration_matrix(bad, 0.5).is_err());
    }

    #[test]
    fn invalid_settings() {
        let p = LassoProblem::new(Matrix::identity(2), vec![1.0, 1.0], 0.1).unwrap();
        let bad = AdmmSettings {
            rho: 0.0,
            ..Default::default()
        };
        assert!(admm_lasso(&p, &bad).is_err());
        assert!(LassoProblem::new(Matrix::<f64>::identity(2), vec![1.0], 0.1).is_err());
        assert!(LassoProblem::new(Matrix::<f64>::identity(1), vec![1.0], -1.0).is_err());
    }
}
