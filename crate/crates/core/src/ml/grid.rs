use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::MlError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Logreg,
    GaussianNb,
    Cart,
    Linreg,
    DnnStd,
    DnnEarly,
    LinearSvm,
    Knn,
    RandomForest,
}

impl Algorithm {
    pub const ALL: [Algorithm; 9] = [
        Self::Logreg,
        Self::GaussianNb,
        Self::Cart,
        Self::Linreg,
        Self::DnnStd,
        Self::DnnEarly,
        Self::LinearSvm,
        Self::Knn,
        Self::RandomForest,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Logreg => "logreg",
            Self::GaussianNb => "gaussian-nb",
            Self::Cart => "cart",
            Self::Linreg => "linreg",
            Self::DnnStd => "dnn-std",
            Self::DnnEarly => "dnn-early",
            Self::LinearSvm => "linear-svm",
            Self::Knn => "knn",
            Self::RandomForest => "random-forest",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algorithm {
    type Err = MlError;
    fn from_str(s: &str) -> Result<Self, MlError> {
        Self::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| MlError::UnknownAlgorithm(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EarlyStopping {
    pub patience: usize,
    pub min_delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum HyperParams {
    Logreg {
        learning_rate: f64,
        l2: f64,
        epochs: usize,
    },
    GaussianNb {
        var_floor: f64,
    },
    Cart {
        max_depth: Option<usize>,
        min_samples_split: usize,
    },
    Linreg {
        ridge: f64,
    },
    Dnn {
        hidden: Vec<usize>,
        learning_rate: f64,
        batch_size: usize,
        epochs: usize,
        early_stopping: Option<EarlyStopping>,
    },
    LinearSvm {
        lambda: f64,
        learning_rate: f64,
        epochs: usize,
    },
    Knn {
        k: usize,
    },
    RandomForest {
        trees: usize,
        max_depth: Option<usize>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub config_id: u32,
    pub algorithm: Algorithm,
    pub hyper_params: HyperParams,
}

const DNN_PRESETS: [&[usize]; 5] = [&[8], &[16], &[16, 8], &[32, 16], &[32, 16, 8]];

/// The fixed 36-configuration grid, ids 1..=36.
pub fn enumerate_configs() -> Vec<ModelConfig> {
    use HyperParams as H;
    let mut grid: Vec<(Algorithm, HyperParams)> = Vec::new();
    for (learning_rate, l2) in [(0.1, 0.0), (0.1, 1e-3), (0.5, 1e-2)] {
        grid.push((
            Algorithm::Logreg,
            H::Logreg {
                learning_rate,
                l2,
                epochs: 1000,
            },
        ));
    }
    grid.push((Algorithm::GaussianNb, H::GaussianNb { var_floor: 1e-9 }));
    for max_depth in [Some(5), Some(10), Some(20), None] {
        grid.push((
            Algorithm::Cart,
            H::Cart {
                max_depth,
                min_samples_split: 2,
            },
        ));
    }
    grid.push((Algorithm::Linreg, H::Linreg { ridge: 1e-9 }));
    for (algorithm, epochs, early_stopping) in [
        (Algorithm::DnnStd, 100, None),
        (
            Algorithm::DnnEarly,
            300,
            Some(EarlyStopping {
                patience: 10,
                min_delta: 1e-4,
            }),
        ),
    ] {
        for hidden in DNN_PRESETS {
            grid.push((
                algorithm,
                H::Dnn {
                    hidden: hidden.to_vec(),
                    learning_rate: 0.01,
                    batch_size: 32,
                    epochs,
                    early_stopping,
                },
            ));
        }
    }
    for lambda in [1e-4, 1e-3, 1e-2, 1e-1] {
        grid.push((
            Algorithm::LinearSvm,
            H::LinearSvm {
                lambda,
                learning_rate: 0.5,
                epochs: 500,
            },
        ));
    }
    for k in [1, 3, 5, 7, 9, 11, 15, 21] {
        grid.push((Algorithm::Knn, H::Knn { k }));
    }
    for (trees, max_depth) in [(10, None), (25, None), (50, None), (50, Some(5)), (100, Some(10))] {
        grid.push((Algorithm::RandomForest, H::RandomForest { trees, max_depth }));
    }
    grid.into_iter()
        .enumerate()
        .map(|(i, (algorithm, hyper_params))| ModelConfig {
            config_id: i as u32 + 1,
            algorithm,
            hyper_params,
        })
        .collect()
}
