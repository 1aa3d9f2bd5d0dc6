//! Multi-label evaluation metrics.
//!
//! Truth and predictions are ±1 matrices, scores are real, one row per
//! instance. Conventions:
//!
//! * Ranks are 1-based by descending score; equal scores are ordered by
//!   ascending label index.
//! * Coverage is `(worst rank of a relevant label - 1) / q`, so it lies in
//!   `[0, 1)`.
//! * Ranking loss counts a (relevant, irrelevant) pair as 1 when the relevant
//!   label scores strictly lower and as 1/2 on an exact tie.
//! * Instances with no relevant label are skipped by one-error, coverage,
//!   ranking loss and average precision; ranking loss also skips instances
//!   where every label is relevant. A metric left with no instance is an
//!   error.
//! * A label whose F1 denominator `2TP + FP + FN` is zero contributes 0 to
//!   macro-F1.
//!
//! One-error, Hamming loss, coverage and ranking loss are losses; average
//! precision and both F1 scores are gains.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetricSkips {
    pub one_error: usize,
    pub coverage: usize,
    pub ranking_loss: usize,
    pub average_precision: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport<T> {
    pub one_error: T,
    pub hamming_loss: T,
    pub coverage: T,
    pub ranking_loss: T,
    pub average_precision: T,
    pub macro_f1: T,
    pub micro_f1: T,
    pub skipped: MetricSkips,
}

/// Identifies one of the seven metrics.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    OneError,
    HammingLoss,
    Coverage,
    RankingLoss,
    AveragePrecision,
    MacroF1,
    MicroF1,
}

impl Metric {
    pub const ALL: [Metric; 7] = [
        Metric::OneError,
        Metric::HammingLoss,
        Metric::Coverage,
        Metric::RankingLoss,
        Metric::AveragePrecision,
        Metric::MacroF1,
        Metric::MicroF1,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::OneError => "one_error",
            Metric::HammingLoss => "hamming_loss",
            Metric::Coverage => "coverage",
            Metric::RankingLoss => "ranking_loss",
            Metric::AveragePrecision => "average_precision",
            Metric::MacroF1 => "macro_f1",
            Metric::MicroF1 => "micro_f1",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.name() == name)
    }

    pub fn higher_is_better(self) -> bool {
        matches!(
            self,
            Metric::AveragePrecision | Metric::MacroF1 | Metric::MicroF1
        )
    }
}

impl<T: Scalar> MetricReport<T> {
    pub fn get(&self, metric: Metric) -> T {
        match metric {
            Metric::OneError => self.one_error,
            Metric::HammingLoss => self.hamming_loss,
            Metric::Coverage => self.coverage,
            Metric::RankingLoss => self.ranking_loss,
            Metric::AveragePrecision => self.average_precision,
            Metric::MacroF1 => self.macro_f1,
            Metric::MicroF1 => self.micro_f1,
        }
    }

    pub fn values(&self) -> [T; 7] {
        Metric::ALL.map(|m| self.get(m))
    }

    /// Flat `key=value` lines, metrics in canonical order, then skip counts.
    pub fn to_key_value(&self) -> String {
        let mut out = String::new();
        for m in Metric::ALL {
            let _ = writeln!(out, "{}={}", m.name(), self.get(m));
        }
        let s = &self.skipped;
        let _ = writeln!(out, "skipped.one_error={}", s.one_error);
        let _ = writeln!(out, "skipped.coverage={}", s.coverage);
        let _ = writeln!(out, "skipped.ranking_loss={}", s.ranking_loss);
        let _ = writeln!(out, "skipped.average_precision={}", s.average_precision);
        out
    }
}

fn check_shapes<T: Scalar>(a: &Matrix<T>, b: &Matrix<T>, what: &str) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::shape(
            format!("metric inputs ({what})"),
            format!("{}x{}", a.nrows(), a.ncols()),
            format!("{}x{}", b.nrows(), b.ncols()),
        ));
    }
    if a.nrows() == 0 || a.ncols() == 0 {
        return Err(Error::Empty {
            context: "metric inputs".into(),
        });
    }
    Ok(())
}

fn check_scored<T: Scalar>(truth: &Matrix<T>, scores: &Matrix<T>) -> Result<()> {
    check_shapes(truth, scores, "truth vs scores")?;
    if !scores.is_finite() {
        return Err(Error::InvalidInput("scores must be finite".into()));
    }
    Ok(())
}

/// Label indices sorted by rank (best first).
fn ranking<T: Scalar>(scores: &[T]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    // stable sort keeps ascending index among equal scores
    order.sort_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    order
}

/// 1-based rank of every label.
fn ranks<T: Scalar>(scores: &[T]) -> Vec<usize> {
    let mut r = vec![0; scores.len()];
    for (pos, j) in ranking(scores).into_iter().enumerate() {
        r[j] = pos + 1;
    }
    r
}

fn is_relevant<T: Scalar>(y: T) -> bool {
    y > T::zero()
}

/// Averages per-instance values, skipping `None`. Returns (mean, skipped).
fn mean_over_instances<T: Scalar>(
    m: usize,
    metric: &'static str,
    mut per_instance: impl FnMut(usize) -> Option<T>,
) -> Result<(T, usize)> {
    let mut sum = T::zero();
    let mut valid = 0usize;
    for i in 0..m {
        if let Some(v) = per_instance(i) {
            sum += v;
            valid += 1;
        }
    }
    if valid == 0 {
        return Err(Error::NoValidInstances { metric });
    }
    Ok((sum / T::from_count(valid), m - valid))
}

fn one_error_impl<T: Scalar>(truth: &Matrix<T>, scores: &Matrix<T>) -> Result<(T, usize)> {
    check_scored(truth, scores)?;
    mean_over_instances(truth.nrows(), "one_error", |i| {
        let t = truth.row(i);
        if !t.iter().any(|&y| is_relevant(y)) {
            return None;
        }
        let top = ranking(scores.row(i))[0];
        Some(if is_relevant(t[top]) { T::zero() } else { T::one() })
    })
}

fn coverage_impl<T: Scalar>(truth: &Matrix<T>, scores: &Matrix<T>) -> Result<(T, usize)> {
    check_scored(truth, scores)?;
    let q = T::from_count(truth.ncols());
    mean_over_instances(truth.nrows(), "coverage", |i| {
        let t = truth.row(i);
        let r = ranks(scores.row(i));
        let worst = (0..t.len())
            .filter(|&j| is_relevant(t[j]))
            .map(|j| r[j])
            .max()?;
        Some(T::from_count(worst - 1) / q)
    })
}

fn ranking_loss_impl<T: Scalar>(truth: &Matrix<T>, scores: &Matrix<T>) -> Result<(T, usize)> {
    check_scored(truth, scores)?;
    let half = T::lit(0.5);
    mean_over_instances(truth.nrows(), "ranking_loss", |i| {
        let t = truth.row(i);
        let s = scores.row(i);
        let (rel, irr): (Vec<usize>, Vec<usize>) = (0..t.len()).partition(|&j| is_relevant(t[j]));
        if rel.is_empty() || irr.is_empty() {
            return None;
        }
        let mut bad = T::zero();
        for &r in &rel {
            for &u in &irr {
                if s[r] < s[u] {
                    bad += T::one();
                } else if s[r] == s[u] {
                    bad += half;
                }
            }
        }
        Some(bad / T::from_count(rel.len() * irr.len()))
    })
}

fn average_precision_impl<T: Scalar>(truth: &Matrix<T>, scores: &Matrix<T>) -> Result<(T, usize)> {
    check_scored(truth, scores)?;
    mean_over_instances(truth.nrows(), "average_precision", |i| {
        let t = truth.row(i);
        let n_rel = t.iter().filter(|&&y| is_relevant(y)).count();
        if n_rel == 0 {
            return None;
        }
        // walking down the ranking, the k-th relevant label found at
        // position p contributes k / p
        let mut found = 0usize;
        let mut sum = T::zero();
        for (pos, j) in ranking(scores.row(i)).into_iter().enumerate() {
            if is_relevant(t[j]) {
                found += 1;
                sum += T::from_count(found) / T::from_count(pos + 1);
            }
        }
        Some(sum / T::from_count(n_rel))
    })
}

pub fn one_error<T: Scalar>(truth: &Matrix<T>, scores: &Matrix<T>) -> Result<T> {
    one_error_impl(truth, scores).map(|(v, _)| v)
}

pub fn coverage<T: Scalar>(truth: &Matrix<T>, scores: &Matrix<T>) -> Result<T> {
    coverage_impl(truth, scores).map(|(v, _)| v)
}

pub fn ranking_loss<T: Scalar>(truth: &Matrix<T>, scores: &Matrix<T>) -> Result<T> {
    ranking_loss_impl(truth, scores).map(|(v, _)| v)
}

pub fn average_precision<T: Scalar>(truth: &Matrix<T>, scores: &Matrix<T>) -> Result<T> {
    average_precision_impl(truth, scores).map(|(v, _)| v)
}

pub fn hamming_loss<T: Scalar>(truth: &Matrix<T>, predictions: &Matrix<T>) -> Result<T> {
    check_shapes(truth, predictions, "truth vs predictions")?;
    let wrong = truth
        .as_slice()
        .iter()
        .zip(predictions.as_slice())
        .filter(|(&t, &p)| is_relevant(t) != is_relevant(p))
        .count();
    Ok(T::from_count(wrong) / T::from_count(truth.as_slice().len()))
}

#[derive(Clone, Copy, Default)]
struct Confusion {
    tp: usize,
    fp: usize,
    fn_: usize,
}

impl Confusion {
    fn f1<T: Scalar>(self) -> T {
        let denom = 2 * self.tp + self.fp + self.fn_;
        if denom == 0 {
            T::zero()
        } else {
            T::from_count(2 * self.tp) / T::from_count(denom)
        }
    }
}

fn per_label_confusion<T: Scalar>(truth: &Matrix<T>, predictions: &Matrix<T>) -> Vec<Confusion> {
    let mut counts = vec![Confusion::default(); truth.ncols()];
    for (t_row, p_row) in truth.rows_iter().zip(predictions.rows_iter()) {
        for ((c, &t), &p) in counts.iter_mut().zip(t_row).zip(p_row) {
            match (is_relevant(t), is_relevant(p)) {
                (true, true) => c.tp += 1,
                (false, true) => c.fp += 1,
                (true, false) => c.fn_ += 1,
                (false, false) => {}
            }
        }
    }
    counts
}

pub fn macro_f1<T: Scalar>(truth: &Matrix<T>, predictions: &Matrix<T>) -> Result<T> {
    check_shapes(truth, predictions, "truth vs predictions")?;
    let counts = per_label_confusion(truth, predictions);
    let total: T = counts.iter().map(|c| c.f1::<T>()).sum();
    Ok(total / T::from_count(counts.len()))
}

pub fn micro_f1<T: Scalar>(truth: &Matrix<T>, predictions: &Matrix<T>) -> Result<T> {
    check_shapes(truth, predictions, "truth vs predictions")?;
    let pooled = per_label_confusion(truth, predictions)
        .into_iter()
        .fold(Confusion::default(), |acc, c| Confusion {
            tp: acc.tp + c.tp,
            fp: acc.fp + c.fp,
            fn_: acc.fn_ + c.fn_,
        });
    Ok(pooled.f1())
}

/// All seven metrics plus per-metric skipped-instance counts.
pub fn evaluate_all<T: Scalar>(
    truth: &Matrix<T>,
    scores: &Matrix<T>,
    predictions: &Matrix<T>,
) -> Result<MetricReport<T>> {
    check_shapes(truth, scores, "truth vs scores")?;
    check_shapes(truth, predictions, "truth vs predictions")?;
    let (one_error, oe_skip) = one_error_impl(truth, scores)?;
    let (coverage, cov_skip) = coverage_impl(truth, scores)?;
    let (ranking_loss, rl_skip) = ranking_loss_impl(truth, scores)?;
    let (average_precision, ap_skip) = average_precision_impl(truth, scores)?;
    Ok(MetricReport {
        one_error,
        hamming_loss: hamming_loss(truth, predictions)?,
        coverage,
        ranking_loss,
        average_precision,
        macro_f1: macro_f1(truth, predictions)?,
        micro_f1: micro_f1(truth, predictions)?,
        skipped: MetricSkips {
            one_error: oe_skip,
            coverage: cov_skip,
            ranking_loss: rl_skip,
            average_precision: ap_skip,
        },
    })
}

/// Like [`evaluate_all`], but a ranking metric left with no valid instance is
/// NaN, with every instance counted as skipped, instead of an error. Used for
/// small cross-validation folds.
pub fn evaluate_lenient<T: Scalar>(
    truth: &Matrix<T>,
    scores: &Matrix<T>,
    predictions: &Matrix<T>,
) -> Result<MetricReport<T>> {
    check_shapes(truth, scores, "truth vs scores")?;
    check_shapes(truth, predictions, "truth vs predictions")?;
    let m = truth.nrows();
    let lenient = |r: Result<(T, usize)>| match r {
        Err(Error::NoValidInstances { .. }) => Ok((T::nan(), m)),
        other => other,
    };
    let (one_error, oe_skip) = lenient(one_error_impl(truth, scores))?;
    let (coverage, cov_skip) = lenient(coverage_impl(truth, scores))?;
    let (ranking_loss, rl_skip) = lenient(ranking_loss_impl(truth, scores))?;
    let (average_precision, ap_skip) = lenient(average_precision_impl(truth, scores))?;
    Ok(MetricReport {
        one_error,
        hamming_loss: hamming_loss(truth, predictions)?,
        coverage,
        ranking_loss,
        average_precision,
        macro_f1: macro_f1(truth, predictions)?,
        micro_f1: micro_f1(truth, predictions)?,
        skipped: MetricSkips {
            one_error: oe_skip,
            coverage: cov_skip,
            ranking_loss: rl_skip,
            average_precision: ap_skip,
        },
    })
}
