//! Monte Carlo cross-validation of competing model specifications.

mod compare;
mod cv;
mod metrics;
mod output;

pub use compare::{compare_models, welch_test, PairTest, SignificanceMatrix};
pub use cv::{
    rotation_folds, run_cv, run_repetition, split_indices, CvOptions, CvReport, FoldDiagnostics,
    MetricSummary, ModelSummary, RepetitionResult, SitePrediction,
};
pub use metrics::{metrics, Metric, MetricSet};
pub use output::{write_long, write_plot_data, write_significance, write_summary};
