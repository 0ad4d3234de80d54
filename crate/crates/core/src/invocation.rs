//! HNII/HNOI: per-function counts of incoming and outgoing call edges whose
//! confidence passes a threshold.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{HybridCallGraph, SourcePosition};

/// The thresholds used throughout the experiments.
pub const DEFAULT_THRESHOLDS: [f64; 4] = [0.00, 0.05, 0.20, 0.30];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Comparator {
    /// confidence > threshold
    #[default]
    Strict,
    /// confidence >= threshold
    Inclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ThresholdConfig {
    pub threshold: f64,
    pub comparator: Comparator,
}

impl ThresholdConfig {
    pub fn strict(threshold: f64) -> Self {
        Self {
            threshold,
            comparator: Comparator::Strict,
        }
    }

    pub fn passes(&self, confidence: f64) -> bool {
        match self.comparator {
            Comparator::Strict => confidence > self.threshold,
            Comparator::Inclusive => confidence >= self.threshold,
        }
    }
}

/// One metric record, field order as in the metric document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InvocationCounts {
    pub pos: SourcePosition,
    pub entry: bool,
    #[serde(rename = "final")]
    pub is_final: bool,
    pub hnii: u64,
    pub hnoi: u64,
}

#[derive(Debug, Error, PartialEq)]
pub enum InvocationError {
    #[error("threshold {0} is outside [0, 1]")]
    ThresholdOutOfRange(f64),
    #[error("thresholds must be sorted ascending")]
    UnsortedThresholds,
    #[error("descriptive statistics of an empty list")]
    Empty,
}

/// Counts, for every node, incoming (HNII) and outgoing (HNOI) edges that
/// pass the threshold. Output follows node order; isolated nodes get zeros.
pub fn count_invocations(g: &HybridCallGraph, t: ThresholdConfig) -> Vec<InvocationCounts> {
    let mut counts: BTreeMap<&SourcePosition, (u64, u64)> =
        g.nodes.iter().map(|n| (&n.id, (0, 0))).collect();
    for e in g.edges.iter().filter(|e| t.passes(e.confidence)) {
        if let Some(c) = counts.get_mut(&e.target) {
            c.0 += 1;
        }
        if let Some(c) = counts.get_mut(&e.source) {
            c.1 += 1;
        }
    }
    g.nodes
        .iter()
        .map(|n| {
            let (hnii, hnoi) = counts[&n.id];
            InvocationCounts {
                pos: n.id.clone(),
                entry: n.entry,
                is_final: n.is_final,
                hnii,
                hnoi,
            }
        })
        .collect()
}

/// One [`count_invocations`] result per threshold, same comparator for all.
pub fn threshold_sweep(
    g: &HybridCallGraph,
    thresholds: &[f64],
    comparator: Comparator,
) -> Result<Vec<(f64, Vec<InvocationCounts>)>, InvocationError> {
    for &t in thresholds {
        if !(0.0..=1.0).contains(&t) {
            return Err(InvocationError::ThresholdOutOfRange(t));
        }
    }
    if thresholds.windows(2).any(|w| w[0] > w[1]) {
        return Err(InvocationError::UnsortedThresholds);
    }
    Ok(thresholds
        .iter()
        .map(|&threshold| {
            (
                threshold,
                count_invocations(
                    g,
                    ThresholdConfig {
                        threshold,
                        comparator,
                    },
                ),
            )
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Descriptive {
    pub mean: f64,
    pub median: f64,
    /// Population standard deviation.
    pub stddev: f64,
}

pub fn descriptive_stats(values: &[u64]) -> Result<Descriptive, InvocationError> {
    if values.is_empty() {
        return Err(InvocationError::Empty);
    }
    let n = values.len() as f64;
    let mean = values.iter().map(|&v| v as f64).sum::<f64>() / n;
    let var = values.iter().map(|&v| (v as f64 - mean).powi(2)).sum::<f64>() / n;
    let mut sorted = values.to_vec();
    sorted.sort_unstable();
    let mid = sorted.len() / 2;
    let median = if sorted.len() % 2 == 1 {
        sorted[mid] as f64
    } else {
        (sorted[mid - 1] as f64 + sorted[mid] as f64) / 2.0
    };
    Ok(Descriptive {
        mean,
        median,
        stddev: var.sqrt(),
    })
}

/// File-name stem for a threshold: 0.05 becomes `0_05`.
pub fn threshold_tag(threshold: f64) -> String {
    format!("{threshold:.2}").replace('.', "_")
}

/// Metric document: a JSON array of records.
pub fn write_metric_document(counts: &[InvocationCounts]) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(counts).expect("serializable");
    out.push(b'\n');
    out
}

pub fn read_metric_document(bytes: &[u8]) -> Result<Vec<InvocationCounts>, serde_json::Error> {
    serde_json::from_slice(bytes)
}
