//! Run configuration, evaluation metrics and experiment drivers behind
//! the command-line tool.

pub mod config;
pub mod experiment;
pub mod metrics;

pub use config::RunConfig;
pub use experiment::{
    evaluate, format_fig1d_csv, model_name, prepare_features, run_fig1d, train_and_evaluate,
    Fig1dCell, Fig1dOptions, MetricsReport, RunOutcome,
};
pub use metrics::{
    auc, binary_metrics, classification_metrics, f1_score, regression_metrics,
    ClassificationMetrics, RegressionMetrics,
};
