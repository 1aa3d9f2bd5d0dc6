//! Gaussian kernel `k(x, y) = exp(-||x - y||^2 / (2 sigma^2))`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct KernelSpec<T> {
    bandwidth: T,
}

impl<T: Scalar> KernelSpec<T> {
    pub fn new(bandwidth: T) -> Result<Self> {
        if !(bandwidth > T::zero()) || !bandwidth.is_finite() {
            return Err(Error::param("sigma", "kernel bandwidth must be positive and finite"));
        }
        Ok(Self { bandwidth })
    }

    /// Bandwidth set to the mean pairwise distance of `features`.
    pub fn from_features(features: &Matrix<T>) -> Result<Self> {
        Self::new(gaussian_bandwidth(features)?)
    }

    pub fn bandwidth(&self) -> T {
        self.bandwidth
    }

    pub fn eval(&self, x: &[T], y: &[T]) -> T {
        let d2 = squared_distance(x, y);
        let two = T::lit(2.0);
        (-d2 / (two * self.bandwidth * self.bandwidth)).exp()
    }
}

fn squared_distance<T: Scalar>(x: &[T], y: &[T]) -> T {
    x.iter().zip(y).map(|(&a, &b)| (a - b) * (a - b)).sum()
}

/// Mean Euclidean distance over all `n(n-1)/2` unordered pairs of rows.
pub fn gaussian_bandwidth<T: Scalar>(features: &Matrix<T>) -> Result<T> {
    let n = features.nrows();
    if n < 2 {
        return Err(Error::InvalidInput(format!(
            "bandwidth needs at least two instances, found {n}"
        )));
    }
    let mut total = T::zero();
    for i in 0..n {
        let xi = features.row(i);
        for j in i + 1..n {
            total += squared_distance(xi, features.row(j)).sqrt();
        }
    }
    let pairs = T::from_count(n * (n - 1) / 2);
    let sigma = total / pairs;
    if !(sigma > T::zero()) || !sigma.is_finite() {
        return Err(Error::InvalidInput(
            "all instances are identical, the kernel bandwidth would be zero".into(),
        ));
    }
    Ok(sigma)
}

/// Symmetric `n x n` Gram matrix with unit diagonal.
pub fn kernel_matrix<T: Scalar>(features: &Matrix<T>, spec: &KernelSpec<T>) -> Matrix<T> {
    let n = features.nrows();
    let mut k = Matrix::identity(n);
    for i in 0..n {
        for j in i + 1..n {
            let v = spec.eval(features.row(i), features.row(j));
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    k
}

/// `m x n` matrix with entry `(r, i) = k(test_r, train_i)`.
pub fn cross_kernel<T: Scalar>(
    train: &Matrix<T>,
    test: &Matrix<T>,
    spec: &KernelSpec<T>,
) -> Result<Matrix<T>> {
    if train.ncols() != test.ncols() {
        return Err(Error::shape(
            "cross kernel",
            format!("{} features", train.ncols()),
            format!("{} features", test.ncols()),
        ));
    }
    Ok(Matrix::from_fn(test.nrows(), train.nrows(), |r, i| {
        spec.eval(test.row(r), train.row(i))
    }))
}
