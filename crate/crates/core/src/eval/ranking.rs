use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::metrics::{classification_metrics, ConfusionMatrix, Scores};
use super::wilcoxon::{wilcoxon_signed_rank, StatTestResult};
use super::EvalError;
use crate::dataset::FeatureSetVariant;

/// One (config, variant, fold) outcome: a record of the results document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldResult {
    pub config_id: u32,
    pub algorithm: String,
    pub variant: FeatureSetVariant,
    pub fold: usize,
    pub confusion: ConfusionMatrix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelResult {
    pub config_id: u32,
    pub algorithm: String,
    pub variant: FeatureSetVariant,
    pub confusion: ConfusionMatrix,
    #[serde(flatten)]
    pub scores: Scores,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ScoreName {
    Accuracy,
    Precision,
    Recall,
    FMeasure,
    Mcc,
}

impl ScoreName {
    pub const ALL: [ScoreName; 5] = [
        Self::Accuracy,
        Self::Precision,
        Self::Recall,
        Self::FMeasure,
        Self::Mcc,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Accuracy => "accuracy",
            Self::Precision => "precision",
            Self::Recall => "recall",
            Self::FMeasure => "f_measure",
            Self::Mcc => "mcc",
        }
    }

    pub fn of(self, s: &Scores) -> f64 {
        match self {
            Self::Accuracy => s.accuracy,
            Self::Precision => s.precision,
            Self::Recall => s.recall,
            Self::FMeasure => s.f_measure,
            Self::Mcc => s.mcc,
        }
    }
}

impl FromStr for ScoreName {
    type Err = EvalError;
    fn from_str(s: &str) -> Result<Self, EvalError> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "accuracy" => Ok(Self::Accuracy),
            "precision" => Ok(Self::Precision),
            "recall" => Ok(Self::Recall),
            "f_measure" | "f" | "f1" => Ok(Self::FMeasure),
            "mcc" => Ok(Self::Mcc),
            _ => Err(EvalError::UnknownScore(s.to_string())),
        }
    }
}

/// Sums fold matrices per (config, variant) and scores the totals.
pub fn aggregate_folds(folds: &[FoldResult]) -> Result<Vec<ModelResult>, EvalError> {
    let mut groups: BTreeMap<(u32, FeatureSetVariant), (String, ConfusionMatrix)> = BTreeMap::new();
    for f in folds {
        let entry = groups
            .entry((f.config_id, f.variant))
            .or_insert_with(|| (f.algorithm.clone(), ConfusionMatrix::default()));
        entry.1 = entry.1.add(&f.confusion);
    }
    groups
        .into_iter()
        .map(|((config_id, variant), (algorithm, confusion))| {
            Ok(ModelResult {
                config_id,
                algorithm,
                variant,
                confusion,
                scores: classification_metrics(&confusion)?,
            })
        })
        .collect()
}

fn rank_order(by: ScoreName) -> impl Fn(&ModelResult, &ModelResult) -> Ordering {
    move |a, b| {
        by.of(&b.scores)
            .total_cmp(&by.of(&a.scores))
            .then(b.scores.f_measure.total_cmp(&a.scores.f_measure))
            .then(a.config_id.cmp(&b.config_id))
            .then(a.variant.cmp(&b.variant))
    }
}

/// Results by descending score; ties by F-measure (descending), then
/// config id, then variant. Returns at most `top_k` rows.
pub fn rank_models(results: &[ModelResult], by: &str, top_k: usize) -> Result<Vec<ModelResult>, EvalError> {
    let by: ScoreName = by.parse()?;
    let mut out = results.to_vec();
    out.sort_by(rank_order(by));
    out.truncate(top_k);
    Ok(out)
}

/// The three feature-set pairs in report order.
pub const VARIANT_PAIRS: [(FeatureSetVariant, FeatureSetVariant); 3] = [
    (FeatureSetVariant::S, FeatureSetVariant::H),
    (FeatureSetVariant::S, FeatureSetVariant::SH),
    (FeatureSetVariant::H, FeatureSetVariant::SH),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairTest {
    /// e.g. `S vs. S+H`
    pub pair: String,
    #[serde(flatten)]
    pub result: StatTestResult,
}

/// Paired tests between feature sets, matching results by config id.
pub fn compare_feature_sets(results: &[ModelResult], score: &str) -> Result<Vec<PairTest>, EvalError> {
    let score: ScoreName = score.parse()?;
    let by_variant = |v: FeatureSetVariant| -> BTreeMap<u32, f64> {
        results
            .iter()
            .filter(|r| r.variant == v)
            .map(|r| (r.config_id, score.of(&r.scores)))
            .collect()
    };
    let mut out = Vec::new();
    for (a, b) in VARIANT_PAIRS {
        let (xa, xb) = (by_variant(a), by_variant(b));
        if !xa.keys().eq(xb.keys()) {
            return Err(EvalError::CoverageMismatch(a.to_string(), b.to_string()));
        }
        let x: Vec<f64> = xa.values().copied().collect();
        let y: Vec<f64> = xb.values().copied().collect();
        out.push(PairTest {
            pair: format!("{a} vs. {b}"),
            result: wilcoxon_signed_rank(&x, &y)?,
        });
    }
    Ok(out)
}

/// Best configuration per algorithm by F-measure across all variants,
/// ordered by that F-measure (descending).
pub fn best_per_algorithm(results: &[ModelResult]) -> Vec<ModelResult> {
    let mut sorted = results.to_vec();
    sorted.sort_by(rank_order(ScoreName::FMeasure));
    let mut seen = std::collections::BTreeSet::new();
    sorted
        .into_iter()
        .filter(|r| seen.insert(r.algorithm.clone()))
        .collect()
}
