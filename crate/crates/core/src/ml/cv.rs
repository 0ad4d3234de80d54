use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::grid::ModelConfig;
use super::models::{train, TrainedModel};
use super::preprocess::{oversample_minority, Standardizer};
use super::MlError;
use crate::dataset::{FeatureMatrix, FeatureSetVariant};
use crate::eval::{ConfusionMatrix, FoldResult};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CvOptions {
    pub k: usize,
    pub seed: u64,
    pub oversample_factor: f64,
}

impl Default for CvOptions {
    fn default() -> Self {
        CvOptions {
            k: 10,
            seed: 0,
            oversample_factor: 1.5,
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a base seed with a path of integers into an independent seed.
pub fn derive_seed(seed: u64, parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(splitmix64(seed), |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

/// Fold index of every row. Each class is shuffled with the seed and dealt
/// round-robin, so fold sizes per class differ by at most one. Depends only
/// on the labels and the seed.
pub fn stratified_folds(labels: &[u8], k: usize, seed: u64) -> Result<Vec<usize>, MlError> {
    if k < 2 {
        return Err(MlError::BadFoldCount(k));
    }
    let mut fold = vec![0; labels.len()];
    for label in [0u8, 1] {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == label).collect();
        if members.len() < k {
            return Err(MlError::ClassTooSmall {
                label,
                count: members.len(),
                k,
            });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[u64::from(label)]));
        members.shuffle(&mut rng);
        for (j, i) in members.into_iter().enumerate() {
            fold[i] = j % k;
        }
    }
    Ok(fold)
}

/// Oversample the training part, fit the standardizer on it, train, and
/// return the model with its preprocessor attached.
fn fit_fold(
    config: &ModelConfig,
    data: &FeatureMatrix,
    train_idx: &[usize],
    opts: &CvOptions,
    fold: usize,
) -> Result<TrainedModel, MlError> {
    let x: Vec<Vec<f64>> = train_idx.iter().map(|&i| data.rows[i].clone()).collect();
    let y: Vec<u8> = train_idx.iter().map(|&i| data.labels[i]).collect();
    let base = [u64::from(config.config_id), fold as u64];
    let (x, y) = oversample_minority(&x, &y, opts.oversample_factor, derive_seed(opts.seed, &[base[0], base[1], 1]))?;
    let standardizer = Standardizer::fit(&x)?;
    let xs = standardizer.apply(&x);
    let mut model = train(config, &xs, &y, derive_seed(opts.seed, &base))?;
    if !standardizer.dropped.is_empty() {
        model
            .diagnostics
            .push(format!("dropped zero-variance columns {:?}", standardizer.dropped));
    }
    model.preprocessor = Some(standardizer);
    Ok(model)
}

fn run_fold(
    config: &ModelConfig,
    data: &FeatureMatrix,
    variant: FeatureSetVariant,
    folds: &[usize],
    fold: usize,
    opts: &CvOptions,
) -> Result<FoldResult, MlError> {
    let (test_idx, train_idx): (Vec<usize>, Vec<usize>) = (0..data.len()).partition(|&i| folds[i] == fold);
    let model = fit_fold(config, data, &train_idx, opts, fold)?;
    for d in &model.diagnostics {
        log::debug!("config {} {variant} fold {fold}: {d}", config.config_id);
    }
    let truth: Vec<u8> = test_idx.iter().map(|&i| data.labels[i]).collect();
    let predicted: Vec<u8> = test_idx.iter().map(|&i| model.predict(&data.rows[i])).collect();
    Ok(FoldResult {
        config_id: config.config_id,
        algorithm: config.algorithm.to_string(),
        variant,
        fold,
        confusion: ConfusionMatrix::from_predictions(&truth, &predicted),
    })
}

fn check_data(data: &FeatureMatrix) -> Result<(), MlError> {
    if data.rows.len() != data.labels.len() {
        return Err(MlError::LengthMismatch(data.rows.len(), data.labels.len()));
    }
    super::check_matrix(&data.rows).map(|_| ())
}

/// Stratified k-fold cross-validation of one configuration on one feature
/// set. Returns one confusion matrix per fold.
pub fn cross_validate(
    config: &ModelConfig,
    data: &FeatureMatrix,
    variant: FeatureSetVariant,
    opts: &CvOptions,
) -> Result<Vec<FoldResult>, MlError> {
    check_data(data)?;
    let folds = stratified_folds(&data.labels, opts.k, opts.seed)?;
    (0..opts.k)
        .map(|f| run_fold(config, data, variant, &folds, f, opts))
        .collect()
}

/// Cross-validates every configuration on every feature set, in parallel
/// over (config, variant, fold). All feature sets must share labels so that
/// their folds coincide. Results come back in (config, variant, fold) order.
pub fn run_grid(
    configs: &[ModelConfig],
    datasets: &[(FeatureSetVariant, FeatureMatrix)],
    opts: &CvOptions,
) -> Result<Vec<FoldResult>, MlError> {
    let Some((_, first)) = datasets.first() else {
        return Ok(Vec::new());
    };
    for (_, d) in datasets {
        check_data(d)?;
        if d.labels != first.labels {
            return Err(MlError::UnpairedDatasets);
        }
    }
    let folds = stratified_folds(&first.labels, opts.k, opts.seed)?;
    let jobs: Vec<(&ModelConfig, &(FeatureSetVariant, FeatureMatrix), usize)> = configs
        .iter()
        .flat_map(|c| datasets.iter().flat_map(move |d| (0..opts.k).map(move |f| (c, d, f))))
        .collect();
    jobs.into_par_iter()
        .map(|(c, (v, d), f)| run_fold(c, d, *v, &folds, f, opts))
        .collect()
}
