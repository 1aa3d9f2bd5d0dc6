//! Cross-validation and grid search over `(alpha, lambda2)` at fixed `lambda1`.
//!
//! Every fold learns the correlation matrix, the kernel bandwidth and the
//! model from its training rows only. Within one grid search the correlation
//! matrix and kernel matrix are computed once per inner fold, and the factored
//! kernel system once per inner fold and `lambda2`, then reused across all
//! `alpha` values.
//!
//! Standard deviations use the population form (divide by the number of
//! folds). Folds run in parallel on the current rayon pool; results are
//! collected in fold order, so output does not depend on scheduling.

use std::fmt::Write as _;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::Serialize;

use crate::correlation::{build_collaboration_matrix, learn_correlation_matrix};
use crate::dataset::{kfold_split, Dataset, FoldSplit};
use crate::error::{Error, Result};
use crate::kernel::{kernel_matrix, KernelSpec};
use crate::linalg::Matrix;
use crate::metrics::{evaluate_lenient, Metric, MetricReport};
use crate::scalar::Scalar;
use crate::trainer::{fit_with_system, sign_labels, KernelSystem, TrainedModel, TrainerConfig};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GridPoint<T> {
    pub alpha: T,
    pub lambda1: T,
    pub lambda2: T,
}

impl<T: Scalar> GridPoint<T> {
    /// `base` with this point's hyperparameters.
    pub fn apply(&self, base: &TrainerConfig<T>) -> TrainerConfig<T> {
        TrainerConfig {
            alpha: self.alpha,
            lambda1: self.lambda1,
            lambda2: self.lambda2,
            ..*base
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Grid<T> {
    pub alphas: Vec<T>,
    pub lambda2s: Vec<T>,
    pub lambda1: T,
}

impl<T: Scalar> Default for Grid<T> {
    /// `alpha` in `{0, 0.1, ..., 1}`, `lambda2` in
    /// `{1e-3, 2e-3, 1e-2, 2e-2, 1e-1, 2e-1, 1}`, `lambda1 = 1`.
    fn default() -> Self {
        Self {
            alphas: (0..=10).map(|i| T::from_count(i) / T::lit(10.0)).collect(),
            lambda2s: [1e-3, 2e-3, 1e-2, 2e-2, 1e-1, 2e-1, 1.0]
                .into_iter()
                .map(T::lit)
                .collect(),
            lambda1: T::one(),
        }
    }
}

impl<T: Scalar> Grid<T> {
    pub fn single(point: GridPoint<T>) -> Self {
        Self {
            alphas: vec![point.alpha],
            lambda2s: vec![point.lambda2],
            lambda1: point.lambda1,
        }
    }

    pub fn len(&self) -> usize {
        self.alphas.len() * self.lambda2s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// All points, `alpha`-major in the order given.
    pub fn points(&self) -> Vec<GridPoint<T>> {
        self.alphas
            .iter()
            .flat_map(|&alpha| {
                self.lambda2s.iter().map(move |&lambda2| GridPoint {
                    alpha,
                    lambda1: self.lambda1,
                    lambda2,
                })
            })
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.is_empty() {
            return Err(Error::param("grid", "grid has no points"));
        }
        for p in self.points() {
            p.apply(&TrainerConfig::default()).validate()?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug)]
pub struct TunerSettings<T> {
    /// Settings shared by every fit; its `alpha`, `lambda1` and `lambda2`
    /// are replaced by the grid point.
    pub base: TrainerConfig<T>,
    pub selection: Metric,
    pub inner_k: usize,
}

impl<T: Scalar> Default for TunerSettings<T> {
    fn default() -> Self {
        Self {
            base: TrainerConfig::default(),
            selection: Metric::AveragePrecision,
            inner_k: 5,
        }
    }
}

/// Mean and population standard deviation of one metric over the folds
/// where it is defined.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MetricStat {
    pub metric: Metric,
    pub mean: f64,
    pub std: f64,
    /// Folds that contributed a finite value.
    pub folds: usize,
}

pub fn summarize<T: Scalar>(reports: &[MetricReport<T>]) -> Vec<MetricStat> {
    Metric::ALL
        .into_iter()
        .map(|metric| {
            let vals: Vec<f64> = reports
                .iter()
                .filter_map(|r| r.get(metric).to_f64())
                .filter(|v| v.is_finite())
                .collect();
            let (mean, std) = mean_std(&vals);
            MetricStat {
                metric,
                mean,
                std,
                folds: vals.len(),
            }
        })
        .collect()
}

fn mean_std(vals: &[f64]) -> (f64, f64) {
    if vals.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / n;
    let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Training-side quantities of one fold, shared by every grid point.
struct FoldContext<T> {
    train: Dataset<T>,
    s_matrix: Matrix<T>,
    spec: KernelSpec<T>,
    kernel: Matrix<T>,
    correlation_converged: bool,
}

impl<T: Scalar> FoldContext<T> {
    fn new(train: Dataset<T>, base: &TrainerConfig<T>) -> Result<Self> {
        if train.n_instances() < 2 {
            return Err(Error::InvalidInput(format!(
                "fold too small to train: {} training instance(s)",
                train.n_instances()
            )));
        }
        let corr = learn_correlation_matrix(train.labels(), &base.correlation)?;
        let spec = KernelSpec::from_features(train.features())?;
        let kernel = kernel_matrix(train.features(), &spec);
        Ok(Self {
            correlation_converged: corr.all_converged(),
            s_matrix: corr.s_matrix,
            train,
            spec,
            kernel,
        })
    }

    fn fit(
        &self,
        system: &KernelSystem<T>,
        point: &GridPoint<T>,
        base: &TrainerConfig<T>,
    ) -> Result<TrainedModel<T>> {
        let config = point.apply(base);
        let correlation = build_collaboration_matrix(self.s_matrix.clone(), point.alpha)?;
        fit_with_system(
            system,
            self.spec,
            self.train.features(),
            self.train.labels(),
            &correlation,
            &config,
        )
    }
}

fn evaluate_model<T: Scalar>(model: &TrainedModel<T>, test: &Dataset<T>) -> Result<MetricReport<T>> {
    let scores = model.predict_scores(test.features())?;
    let predictions = sign_labels(&scores);
    evaluate_lenient(test.labels(), &scores, &predictions)
}

/// Trains on every row of `split` except fold `fold`, using only those rows
/// for the correlation matrix and the kernel bandwidth.
pub fn train_on_fold<T: Scalar>(
    dataset: &Dataset<T>,
    split: &FoldSplit,
    fold: usize,
    point: &GridPoint<T>,
    base: &TrainerConfig<T>,
) -> Result<TrainedModel<T>> {
    let ctx = FoldContext::new(dataset.subset(&split.train_indices(fold))?, base)?;
    let system = KernelSystem::new(ctx.kernel.clone(), point.lambda2)?;
    ctx.fit(&system, point, base)
}

#[derive(Clone, Debug, Serialize)]
pub struct GridScore<T> {
    pub point: GridPoint<T>,
    /// Inner-fold mean of the selection metric; NaN if it was undefined on
    /// every inner fold.
    pub score: f64,
    pub stats: Vec<MetricStat>,
    pub nonconverged_fits: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct GridSearchResult<T> {
    pub metric: Metric,
    pub inner_k: usize,
    pub seed: u64,
    pub fits: usize,
    pub best: GridPoint<T>,
    pub best_score: f64,
    /// One entry per grid point, `alpha`-major in grid order.
    pub table: Vec<GridScore<T>>,
}

impl<T> GridSearchResult<T> {
    pub fn nonconverged_fits(&self) -> usize {
        self.table.iter().map(|s| s.nonconverged_fits).sum()
    }
}

/// Index of the best score; ties go to the smaller `alpha`, then the
/// smaller `lambda2`.
fn select_best<T: Scalar>(table: &[GridScore<T>], metric: Metric) -> usize {
    let mut order: Vec<usize> = (0..table.len()).collect();
    order.sort_by(|&i, &j| {
        let (p, q) = (&table[i].point, &table[j].point);
        p.alpha
            .partial_cmp(&q.alpha)
            .unwrap()
            .then(p.lambda2.partial_cmp(&q.lambda2).unwrap())
    });
    let mut best = order[0];
    for &i in &order[1..] {
        if better(metric, table[i].score, table[best].score) {
            best = i;
        }
    }
    best
}

fn better(metric: Metric, candidate: f64, incumbent: f64) -> bool {
    if candidate.is_nan() {
        return false;
    }
    if incumbent.is_nan() {
        return true;
    }
    if metric.higher_is_better() {
        candidate > incumbent
    } else {
        candidate < incumbent
    }
}

/// Scores every grid point by `inner_k`-fold cross-validation on `dataset`
/// and returns the best by the selection metric. Ties go to the smaller
/// `alpha`, then the smaller `lambda2`.
pub fn grid_search<T: Scalar>(
    dataset: &Dataset<T>,
    grid: &Grid<T>,
    settings: &TunerSettings<T>,
    seed: u64,
) -> Result<GridSearchResult<T>> {
    grid.validate()?;
    settings.base.validate()?;
    let split = kfold_split(dataset.n_instances(), settings.inner_k, seed)?;
    let contexts: Vec<(FoldContext<T>, Dataset<T>)> = (0..settings.inner_k)
        .into_par_iter()
        .map(|f| {
            let ctx = FoldContext::new(dataset.subset(&split.train_indices(f))?, &settings.base)?;
            Ok((ctx, dataset.subset(&split.test_indices(f))?))
        })
        .collect::<Result<_>>()?;

    let na = grid.alphas.len();
    let nl = grid.lambda2s.len();
    let tasks: Vec<(usize, usize)> = (0..settings.inner_k)
        .flat_map(|f| (0..nl).map(move |l| (f, l)))
        .collect();
    // results[(f, l)][a] = (report, converged)
    let results: Vec<Vec<(MetricReport<T>, bool)>> = tasks
        .par_iter()
        .map(|&(f, l)| {
            let (ctx, test) = &contexts[f];
            let lambda2 = grid.lambda2s[l];
            let system = KernelSystem::new(ctx.kernel.clone(), lambda2)?;
            grid.alphas
                .iter()
                .map(|&alpha| {
                    let point = GridPoint {
                        alpha,
                        lambda1: grid.lambda1,
                        lambda2,
                    };
                    let model = ctx.fit(&system, &point, &settings.base)?;
                    Ok((evaluate_model(&model, test)?, model.diagnostics().converged))
                })
                .collect()
        })
        .collect::<Result<_>>()?;

    let mut table = Vec::with_capacity(na * nl);
    for a in 0..na {
        for l in 0..nl {
            let per_fold: Vec<&(MetricReport<T>, bool)> =
                (0..settings.inner_k).map(|f| &results[f * nl + l][a]).collect();
            let reports: Vec<MetricReport<T>> = per_fold.iter().map(|r| r.0).collect();
            let stats = summarize(&reports);
            let score = stats
                .iter()
                .find(|s| s.metric == settings.selection)
                .map_or(f64::NAN, |s| s.mean);
            table.push(GridScore {
                point: GridPoint {
                    alpha: grid.alphas[a],
                    lambda1: grid.lambda1,
                    lambda2: grid.lambda2s[l],
                },
                score,
                stats,
                nonconverged_fits: per_fold.iter().filter(|r| !r.1).count(),
            });
        }
    }

    let best = select_best(&table, settings.selection);

    Ok(GridSearchResult {
        metric: settings.selection,
        inner_k: settings.inner_k,
        seed,
        fits: grid.len() * settings.inner_k,
        best: table[best].point,
        best_score: table[best].score,
        table,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct FoldResult<T> {
    pub fold: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub point: GridPoint<T>,
    pub report: MetricReport<T>,
    pub outer_iterations: usize,
    pub converged: bool,
    pub correlation_converged: bool,
    /// Not serialized, so that result files are reproducible byte for byte.
    #[serde(skip)]
    pub wall_clock: Duration,
}

#[derive(Clone, Debug, Serialize)]
pub struct CvResult<T> {
    pub k: usize,
    pub seed: u64,
    pub folds: Vec<FoldResult<T>>,
    pub summary: Vec<MetricStat>,
    /// Inner grid search per outer fold; empty when a fixed point was used.
    pub tuning: Vec<GridSearchResult<T>>,
}

impl<T: Scalar> CvResult<T> {
    pub fn stat(&self, metric: Metric) -> MetricStat {
        self.summary
            .iter()
            .copied()
            .find(|s| s.metric == metric)
            .expect("summary holds every metric")
    }

    /// True when every final and inner fit, and every correlation solve,
    /// converged.
    pub fn all_converged(&self) -> bool {
        self.folds
            .iter()
            .all(|f| f.converged && f.correlation_converged)
            && self.tuning.iter().all(|t| t.nonconverged_fits() == 0)
    }

    pub fn total_wall_clock(&self) -> Duration {
        self.folds.iter().map(|f| f.wall_clock).sum()
    }

    /// Human-readable report: per-fold lines, then `mean ± std` per metric.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# camel cross-validation k={} seed={}", self.k, self.seed);
        let _ = write!(out, "fold\tn_train\tn_test\talpha\tlambda1\tlambda2\tconverged");
        for m in Metric::ALL {
            let _ = write!(out, "\t{}", m.name());
        }
        out.push('\n');
        for f in &self.folds {
            let _ = write!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}",
                f.fold,
                f.n_train,
                f.n_test,
                f.point.alpha,
                f.point.lambda1,
                f.point.lambda2,
                f.converged && f.correlation_converged
            );
            for v in f.report.values() {
                let _ = write!(out, "\t{v}");
            }
            out.push('\n');
        }
        out.push('\n');
        for s in &self.summary {
            let _ = writeln!(
                out,
                "{}\t{:.6} ± {:.6}\t(folds={})",
                s.metric.name(),
                s.mean,
                s.std,
                s.folds
            );
        }
        out
    }

    /// Tab-separated inner-CV means of every metric per outer fold and grid
    /// point, for sensitivity plots. Empty apart from the header when no
    /// tuning was done.
    pub fn sensitivity_tsv(&self) -> String {
        let mut out = String::from("outer_fold\talpha\tlambda1\tlambda2\tselection_score");
        for m in Metric::ALL {
            let _ = write!(out, "\t{}", m.name());
        }
        out.push('\n');
        for (fold, t) in self.tuning.iter().enumerate() {
            for row in &t.table {
                let _ = write!(
                    out,
                    "{fold}\t{}\t{}\t{}\t{}",
                    row.point.alpha, row.point.lambda1, row.point.lambda2, row.score
                );
                for s in &row.stats {
                    let _ = write!(out, "\t{}", s.mean);
                }
                out.push('\n');
            }
        }
        out
    }
}

/// Inner-search seed for an outer fold.
pub fn inner_seed(seed: u64, fold: usize) -> u64 {
    let mut z = seed ^ (fold as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn run_outer<T: Scalar>(
    dataset: &Dataset<T>,
    k: usize,
    seed: u64,
    settings: &TunerSettings<T>,
    choose: impl Fn(usize, &Dataset<T>) -> Result<(GridPoint<T>, Option<GridSearchResult<T>>)> + Sync,
) -> Result<CvResult<T>> {
    settings.base.validate()?;
    let split = kfold_split(dataset.n_instances(), k, seed)?;
    let per_fold: Vec<(FoldResult<T>, Option<GridSearchResult<T>>)> = (0..k)
        .into_par_iter()
        .map(|fold| {
            let start = Instant::now();
            let train = dataset.subset(&split.train_indices(fold))?;
            let test = dataset.subset(&split.test_indices(fold))?;
            let (point, tuning) = choose(fold, &train)?;
            let ctx = FoldContext::new(train, &settings.base)?;
            let system = KernelSystem::new(ctx.kernel.clone(), point.lambda2)?;
            let model = ctx.fit(&system, &point, &settings.base)?;
            let report = evaluate_model(&model, &test)?;
            let result = FoldResult {
                fold,
                n_train: ctx.train.n_instances(),
                n_test: test.n_instances(),
                point,
                report,
                outer_iterations: model.diagnostics().outer_iterations,
                converged: model.diagnostics().converged,
                correlation_converged: ctx.correlation_converged,
                wall_clock: start.elapsed(),
            };
            Ok((result, tuning))
        })
        .collect::<Result<_>>()?;

    let mut folds = Vec::with_capacity(k);
    let mut tuning = Vec::new();
    for (f, t) in per_fold {
        folds.push(f);
        tuning.extend(t);
    }
    let reports: Vec<MetricReport<T>> = folds.iter().map(|f| f.report).collect();
    Ok(CvResult {
        k,
        seed,
        summary: summarize(&reports),
        folds,
        tuning,
    })
}

/// `k`-fold cross-validation at a fixed grid point.
pub fn cross_validate<T: Scalar>(
    dataset: &Dataset<T>,
    point: &GridPoint<T>,
    k: usize,
    seed: u64,
    settings: &TunerSettings<T>,
) -> Result<CvResult<T>> {
    point.apply(&settings.base).validate()?;
    run_outer(dataset, k, seed, settings, |_, _| Ok((*point, None)))
}

/// `k`-fold cross-validation where each outer fold picks its own grid point
/// by an inner grid search on its training rows.
pub fn nested_cross_validate<T: Scalar>(
    dataset: &Dataset<T>,
    grid: &Grid<T>,
    k: usize,
    seed: u64,
    settings: &TunerSettings<T>,
) -> Result<CvResult<T>> {
    grid.validate()?;
    run_outer(dataset, k, seed, settings, |fold, train| {
        let search = grid_search(train, grid, settings, inner_seed(seed, fold))?;
        Ok((search.best, Some(search)))
    })
}
