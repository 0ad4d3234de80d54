//! Preprocessing, the fixed configuration grid, the nine classifier families
//! and cross-validated training.

mod cv;
mod grid;
mod models;
mod nn;
mod preprocess;
mod tree;

pub use cv::{cross_validate, derive_seed, run_grid, stratified_folds, CvOptions};
pub use grid::{enumerate_configs, Algorithm, EarlyStopping, HyperParams, ModelConfig};
pub use models::{train, Model, TrainedModel};
pub use nn::{Mlp, MlpTraining};
pub use preprocess::{oversample_minority, standardize_fit_transform, Standardizer, MIN_STDDEV};
pub use tree::{Forest, Tree, TreeParams};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum MlError {
    #[error("empty feature matrix")]
    Empty,
    #[error("row {row} has {found} columns, expected {expected}")]
    Ragged { row: usize, expected: usize, found: usize },
    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
    #[error("{0} rows and {1} labels")]
    LengthMismatch(usize, usize),
    #[error("need at least 2 rows, got {0}")]
    TooFewRows(usize),
    #[error("oversampling factor must be a finite value >= 1, got {0}")]
    BadOversampleFactor(f64),
    #[error("only one class present")]
    SingleClass,
    #[error("unknown algorithm {0:?}")]
    UnknownAlgorithm(String),
    #[error("hyper-parameters do not fit algorithm {0}")]
    HyperParamMismatch(Algorithm),
    #[error("fold count must be at least 2, got {0}")]
    BadFoldCount(usize),
    #[error("class {label} has {count} rows, fewer than {k} folds")]
    ClassTooSmall { label: u8, count: usize, k: usize },
    #[error("labels differ between feature sets")]
    UnpairedDatasets,
}

/// Validates a non-empty rectangular finite matrix; returns its width.
pub(crate) fn check_matrix(x: &[Vec<f64>]) -> Result<usize, MlError> {
    let width = x.first().ok_or(MlError::Empty)?.len();
    for (row, r) in x.iter().enumerate() {
        if r.len() != width {
            return Err(MlError::Ragged {
                row,
                expected: width,
                found: r.len(),
            });
        }
        if let Some(col) = r.iter().position(|v| !v.is_finite()) {
            return Err(MlError::NonFinite { row, col });
        }
    }
    Ok(width)
}
