//! Quantised classification metrics, output quartiles, paired t-tests,
//! generated-image severity checks and cross-validation.

mod cv;
mod generation;
mod metrics;

pub use cv::{
    evaluate_model, ranking_pool, render_markdown, run_cross_validation, Comparison, CvReport, FoldResult, MeanSd,
    MethodSummary,
};
pub use generation::{per_latent_kendall, severity_controllability, Controllability};
pub use metrics::{
    average_ranks, evaluate_outputs, kendall_tau, output_quartiles, paired_t_test, precision_recall_f1, quantile,
    quantize_output, quartiles, spearman, ClassMetrics, MetricsReport, Quartiles, TTest,
};
