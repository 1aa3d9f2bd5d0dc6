//! Slow reference implementations used by tests and the acceptance suite.
//!
//! Nothing here calls into the production numerical code: inputs are copied
//! into plain nested `Vec<f64>` and every routine is a direct loop over its
//! definition. Sizes are meant to stay small (n <= 200).

use crate::linalg::Matrix;
use crate::metrics::{MetricReport, MetricSkips};

fn to_rows(m: &Matrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

/// Result of [`lasso_coordinate_descent`].
#[derive(Clone, Debug)]
pub struct CdSolution {
    pub coeffs: Vec<f64>,
    pub sweeps: usize,
    pub converged: bool,
}

/// Cyclic coordinate descent on `(1/2)||A w - b||^2 + lambda ||w||_1`.
/// Converged when the largest coordinate change in a sweep is below `tol`.
pub fn lasso_coordinate_descent(
    design: &Matrix<f64>,
    target: &[f64],
    lambda: f64,
    tol: f64,
    max_sweeps: usize,
) -> CdSolution {
    let a = to_rows(design);
    let n = a.len();
    let p = design.ncols();
    assert_eq!(target.len(), n);
    let col_sq: Vec<f64> = (0..p)
        .map(|k| (0..n).map(|i| a[i][k] * a[i][k]).sum())
        .collect();
    let mut w = vec![0.0; p];
    // residual r = b - A w
    let mut r: Vec<f64> = target.to_vec();
    let mut sweeps = 0;
    let mut converged = false;
    while sweeps < max_sweeps {
        sweeps += 1;
        let mut max_change: f64 = 0.0;
        for k in 0..p {
            if col_sq[k] == 0.0 {
                continue;
            }
            let rho_k: f64 = (0..n).map(|i| a[i][k] * (r[i] + a[i][k] * w[k])).sum();
            let new = if rho_k > lambda {
                (rho_k - lambda) / col_sq[k]
            } else if rho_k < -lambda {
                (rho_k + lambda) / col_sq[k]
            } else {
                0.0
            };
            let delta = new - w[k];
            if delta != 0.0 {
                for i in 0..n {
                    r[i] -= a[i][k] * delta;
                }
                w[k] = new;
            }
            max_change = max_change.max(delta.abs());
        }
        if max_change < tol {
            converged = true;
            break;
        }
    }
    CdSolution {
        coeffs: w,
        sweeps,
        converged,
    }
}

/// Lasso objective evaluated by direct loops.
pub fn lasso_objective(design: &Matrix<f64>, target: &[f64], lambda: f64, w: &[f64]) -> f64 {
    let a = to_rows(design);
    let mut sq = 0.0;
    for (i, row) in a.iter().enumerate() {
        let mut f = 0.0;
        for (k, &aik) in row.iter().enumerate() {
            f += aik * w[k];
        }
        sq += (f - target[i]) * (f - target[i]);
    }
    0.5 * sq + lambda * w.iter().map(|x| x.abs()).sum::<f64>()
}

/// Solves the kernel ridge-with-bias saddle-point system
///
/// ```text
/// [ 0  1ᵀ ] [ b ]   [ 0 ]
/// [ 1  H  ] [ a ] = [ y ],   H = K / lambda2 + I
/// ```
///
/// by Gaussian elimination with partial pivoting. Returns `(a, b)`.
pub fn dense_ridge_solve(kernel: &Matrix<f64>, y: &[f64], lambda2: f64) -> (Vec<f64>, f64) {
    let n = kernel.nrows();
    assert_eq!(kernel.ncols(), n);
    assert_eq!(y.len(), n);
    let k = to_rows(kernel);
    let m = n + 1;
    let mut sys = vec![vec![0.0; m + 1]; m];
    for i in 0..n {
        sys[0][i + 1] = 1.0;
        sys[i + 1][0] = 1.0;
        for j in 0..n {
            sys[i + 1][j + 1] = k[i][j] / lambda2 + if i == j { 1.0 } else { 0.0 };
        }
        sys[i + 1][m] = y[i];
    }
    let x = gaussian_elimination(sys);
    (x[1..].to_vec(), x[0])
}

/// Solves an augmented system `[M | rhs]` in place.
fn gaussian_elimination(mut sys: Vec<Vec<f64>>) -> Vec<f64> {
    let m = sys.len();
    for col in 0..m {
        let pivot = (col..m)
            .max_by(|&a, &b| sys[a][col].abs().total_cmp(&sys[b][col].abs()))
            .unwrap();
        sys.swap(col, pivot);
        let p = sys[col][col];
        assert!(p != 0.0, "singular system");
        for row in col + 1..m {
            let factor = sys[row][col] / p;
            if factor == 0.0 {
                continue;
            }
            for c in col..=m {
                sys[row][c] -= factor * sys[col][c];
            }
        }
    }
    let mut x = vec![0.0; m];
    for row in (0..m).rev() {
        let mut s = sys[row][m];
        for c in row + 1..m {
            s -= sys[row][c] * x[c];
        }
        x[row] = s / sys[row][row];
    }
    x
}

/// Gaussian kernel entry by scalar loop.
pub fn gaussian_kernel_entry(x: &[f64], y: &[f64], sigma: f64) -> f64 {
    let mut d2 = 0.0;
    for i in 0..x.len() {
        d2 += (x[i] - y[i]) * (x[i] - y[i]);
    }
    (-d2 / (2.0 * sigma * sigma)).exp()
}

/// Mean pairwise Euclidean distance over all unordered pairs.
pub fn mean_pairwise_distance(features: &Matrix<f64>) -> f64 {
    let x = to_rows(features);
    let mut total = 0.0;
    let mut count = 0usize;
    for i in 0..x.len() {
        for j in i + 1..x.len() {
            let d2: f64 = x[i].iter().zip(&x[j]).map(|(a, b)| (a - b) * (a - b)).sum();
            total += d2.sqrt();
            count += 1;
        }
    }
    total / count as f64
}

/// All seven metrics by explicit enumeration of ranks and label pairs.
///
/// Follows the same conventions as the production metrics: ranks break ties
/// toward the lower label index, ranking loss gives half credit to exact
/// ties, instances without relevant labels are skipped by the ranking
/// metrics (ranking loss also skips all-relevant instances), and an F1 with a
/// zero denominator counts as 0. Metrics with no valid instance come back NaN.
pub fn naive_metrics(truth: &Matrix<f64>, scores: &Matrix<f64>, predictions: &Matrix<f64>) -> MetricReport<f64> {
    let t = to_rows(truth);
    let s = to_rows(scores);
    let p = to_rows(predictions);
    let m = t.len();
    let q = truth.ncols();

    // rank of label j in instance i: 1 + number of labels placed before it
    let rank = |i: usize, j: usize| -> usize {
        let mut before = 0;
        for k in 0..q {
            if s[i][k] > s[i][j] || (s[i][k] == s[i][j] && k < j) {
                before += 1;
            }
        }
        before + 1
    };

    let mut skips = MetricSkips::default();
    let (mut oe_sum, mut oe_n) = (0.0, 0usize);
    let (mut cov_sum, mut cov_n) = (0.0, 0usize);
    let (mut rl_sum, mut rl_n) = (0.0, 0usize);
    let (mut ap_sum, mut ap_n) = (0.0, 0usize);

    for i in 0..m {
        let relevant: Vec<usize> = (0..q).filter(|&j| t[i][j] > 0.0).collect();
        let irrelevant: Vec<usize> = (0..q).filter(|&j| t[i][j] <= 0.0).collect();
        if relevant.is_empty() {
            skips.one_error += 1;
            skips.coverage += 1;
            skips.ranking_loss += 1;
            skips.average_precision += 1;
            continue;
        }
        // one-error: the label holding rank 1
        let top = (0..q).find(|&j| rank(i, j) == 1).unwrap();
        oe_sum += if t[i][top] > 0.0 { 0.0 } else { 1.0 };
        oe_n += 1;

        let worst = relevant.iter().map(|&j| rank(i, j)).max().unwrap();
        cov_sum += (worst - 1) as f64 / q as f64;
        cov_n += 1;

        if irrelevant.is_empty() {
            skips.ranking_loss += 1;
        } else {
            let mut bad = 0.0;
            for &r in &relevant {
                for &u in &irrelevant {
                    if s[i][r] < s[i][u] {
                        bad += 1.0;
                    } else if s[i][r] == s[i][u] {
                        bad += 0.5;
                    }
                }
            }
            rl_sum += bad / (relevant.len() * irrelevant.len()) as f64;
            rl_n += 1;
        }

        let mut prec = 0.0;
        for &r in &relevant {
            let rr = rank(i, r);
            let above = relevant.iter().filter(|&&o| rank(i, o) <= rr).count();
            prec += above as f64 / rr as f64;
        }
        ap_sum += prec / relevant.len() as f64;
        ap_n += 1;
    }

    let mut mismatches = 0usize;
    for i in 0..m {
        for j in 0..q {
            if (t[i][j] > 0.0) != (p[i][j] > 0.0) {
                mismatches += 1;
            }
        }
    }

    let f1 = |tp: usize, fp: usize, fn_: usize| -> f64 {
        let denom = 2 * tp + fp + fn_;
        if denom == 0 {
            0.0
        } else {
            2.0 * tp as f64 / denom as f64
        }
    };
    let (mut tp_all, mut fp_all, mut fn_all) = (0, 0, 0);
    let mut macro_sum = 0.0;
    for j in 0..q {
        let (mut tp, mut fp, mut fn_) = (0, 0, 0);
        for i in 0..m {
            match (t[i][j] > 0.0, p[i][j] > 0.0) {
                (true, true) => tp += 1,
                (false, true) => fp += 1,
                (true, false) => fn_ += 1,
                (false, false) => {}
            }
        }
        macro_sum += f1(tp, fp, fn_);
        tp_all += tp;
        fp_all += fp;
        fn_all += fn_;
    }

    let mean = |sum: f64, n: usize| if n == 0 { f64::NAN } else { sum / n as f64 };
    MetricReport {
        one_error: mean(oe_sum, oe_n),
        hamming_loss: mismatches as f64 / (m * q) as f64,
        coverage: mean(cov_sum, cov_n),
        ranking_loss: mean(rl_sum, rl_n),
        average_precision: mean(ap_sum, ap_n),
        macro_f1: macro_sum / q as f64,
        micro_f1: f1(tp_all, fp_all, fn_all),
        skipped: skips,
    }
}
