//! Multi-label classification with learned label correlations.
//!
//! The pipeline has two stages. First a sparse label correlation matrix `S`
//! is learned by reconstructing every label column from the others with an
//! l1-regularized least-squares fit ([`correlation`]). Then a Gaussian-kernel
//! model is trained jointly with a label-independent embedding by alternating
//! closed-form updates ([`trainer`]); final scores blend each label's output
//! with the other labels' outputs through `G = (1 - alpha) I + alpha S`.
//!
//! All numerical code is generic over [`Scalar`] (`f32` or `f64`). The `*64`
//! aliases below fix the common `f64` case.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod correlation;
pub mod dataset;
pub mod error;
pub mod kernel;
pub mod linalg;
pub mod metrics;
pub mod model_io;
pub mod oracle;
pub mod scalar;
pub mod synthetic;
pub mod textio;
pub mod trainer;
pub mod tuner;

pub use correlation::{
    admm_lasso, build_collaboration_matrix, lambda_heuristic, learn_correlation_matrix,
    soft_threshold, AdmmSettings, AdmmState, CorrelationFit, CorrelationModel,
    CorrelationSettings, LambdaRule, LassoProblem,
};
pub use dataset::{kfold_split, load_dataset, Dataset, DatasetSummary, FoldSplit};
pub use error::{Error, ErrorClass, Result};
pub use kernel::{cross_kernel, gaussian_bandwidth, kernel_matrix, KernelSpec};
pub use linalg::{Cholesky, Matrix};
pub use metrics::{evaluate_all, evaluate_lenient, Metric, MetricReport, MetricSkips};
pub use model_io::{load_model, model_from_str, model_to_string};
pub use scalar::Scalar;
pub use trainer::{fit, train, FitDiagnostics, KernelSystem, TrainedModel, TrainerConfig};
pub use tuner::{
    cross_validate, grid_search, nested_cross_validate, CvResult, Grid, GridPoint, GridSearchResult,
    TunerSettings,
};

pub type Matrix64 = Matrix<f64>;
pub type Dataset64 = Dataset<f64>;
pub type TrainerConfig64 = TrainerConfig<f64>;
pub type TrainedModel64 = TrainedModel<f64>;
pub type CorrelationModel64 = CorrelationModel<f64>;
pub type MetricReport64 = MetricReport<f64>;
pub type Matrix32 = Matrix<f32>;
pub type Dataset32 = Dataset<f32>;
pub type TrainedModel32 = TrainedModel<f32>;
