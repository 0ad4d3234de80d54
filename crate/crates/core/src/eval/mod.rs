//! Confusion-matrix scores, rankings, and paired significance tests.

mod metrics;
mod ranking;
mod report;
mod wilcoxon;

use thiserror::Error;

pub use metrics::{classification_metrics, f_measure, ConfusionMatrix, Scores};
pub use ranking::{
    aggregate_folds, best_per_algorithm, compare_feature_sets, rank_models, FoldResult, ModelResult, PairTest,
    ScoreName, VARIANT_PAIRS,
};
pub use report::{emit_report, RANKING_COLUMNS, SIGNIFICANCE_COLUMNS, TOP_K};
pub use wilcoxon::{
    midranks, wilcoxon_signed_rank, wilcoxon_signed_rank_with, StatTestResult, TestMethod, ZeroHandling,
    EXACT_LIMIT,
};

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("confusion matrix is empty")]
    EmptyMatrix,
    #[error("unknown score `{0}` (expected accuracy, precision, recall, f_measure or mcc)")]
    UnknownScore(String),
    #[error("paired samples differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("paired samples are empty")]
    EmptySample,
    #[error("paired samples contain non-finite values")]
    NonFinite,
    #[error("feature sets {0} and {1} cover different config ids")]
    CoverageMismatch(String, String),
}
