//! Wilcoxon signed-rank test for paired samples.
//!
//! T is the smaller of the positive and negative rank sums. Ranks of tied
//! |d| are mid-ranks. Up to [`EXACT_LIMIT`] non-zero differences the
//! two-sided p-value is exact: the fraction of the 2^n sign assignments
//! whose statistic is at most the observed T. Above that the normal
//! approximation with tie-corrected variance and a continuity correction
//! is used.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use super::EvalError;

pub const EXACT_LIMIT: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TestMethod {
    Exact,
    NormalApproximation,
}

impl TestMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            TestMethod::Exact => "exact",
            TestMethod::NormalApproximation => "normal-approximation",
        }
    }
}

/// Treatment of zero differences.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ZeroHandling {
    /// Drop zeros before ranking.
    #[default]
    Wilcoxon,
    /// Rank zeros with the rest, then leave their ranks out of both sums.
    Pratt,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StatTestResult {
    #[serde(rename = "T")]
    pub t: f64,
    pub p_value: f64,
    pub n_effective: usize,
    pub method: TestMethod,
}

pub fn wilcoxon_signed_rank(x: &[f64], y: &[f64]) -> Result<StatTestResult, EvalError> {
    wilcoxon_signed_rank_with(x, y, ZeroHandling::Wilcoxon)
}

/// Mid-ranks (1-based) of `values`.
pub fn midranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

pub fn wilcoxon_signed_rank_with(
    x: &[f64],
    y: &[f64],
    zeros: ZeroHandling,
) -> Result<StatTestResult, EvalError> {
    if x.len() != y.len() {
        return Err(EvalError::LengthMismatch(x.len(), y.len()));
    }
    if x.is_empty() {
        return Err(EvalError::EmptySample);
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(EvalError::NonFinite);
    }
    let all: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
    let d: Vec<f64> = match zeros {
        ZeroHandling::Wilcoxon => all.iter().copied().filter(|v| *v != 0.0).collect(),
        ZeroHandling::Pratt => all.clone(),
    };
    let ranks = midranks(&d.iter().map(|v| v.abs()).collect::<Vec<_>>());
    // (rank, sign) of non-zero differences
    let signed: Vec<(f64, bool)> = d
        .iter()
        .zip(&ranks)
        .filter(|(v, _)| **v != 0.0)
        .map(|(v, r)| (*r, *v > 0.0))
        .collect();
    let n = signed.len();
    if n == 0 {
        return Ok(StatTestResult {
            t: 0.0,
            p_value: 1.0,
            n_effective: 0,
            method: TestMethod::Exact,
        });
    }
    // fold from +0.0: an empty float `sum()` is -0.0
    let w_plus = signed.iter().filter(|s| s.1).fold(0.0, |acc, s| acc + s.0);
    let total = signed.iter().fold(0.0, |acc, s| acc + s.0);
    let t = w_plus.min(total - w_plus);

    if n <= EXACT_LIMIT {
        return Ok(StatTestResult {
            t,
            p_value: exact_p(&signed, t),
            n_effective: n,
            method: TestMethod::Exact,
        });
    }
    let mean = total / 2.0;
    let var: f64 = signed.iter().map(|s| s.0 * s.0).sum::<f64>() / 4.0;
    let p = if var == 0.0 {
        1.0
    } else {
        let z = (t - mean + 0.5) / var.sqrt();
        (2.0 * normal_cdf(z.min(0.0))).clamp(f64::MIN_POSITIVE, 1.0)
    };
    Ok(StatTestResult {
        t,
        p_value: p,
        n_effective: n,
        method: TestMethod::NormalApproximation,
    })
}

fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// Exact two-sided p by counting rank-sum patterns. Mid-ranks are
/// multiples of 1/2, so sums are tracked as integers in half-units.
fn exact_p(signed: &[(f64, bool)], t: f64) -> f64 {
    let halves: Vec<usize> = signed.iter().map(|s| (s.0 * 2.0).round() as usize).collect();
    let total: usize = halves.iter().sum();
    let t2 = (t * 2.0).round() as usize;
    // counts[s] = number of sign patterns with positive rank sum s (halves)
    let mut counts = vec![0f64; total + 1];
    counts[0] = 1.0;
    for &h in &halves {
        for s in (h..=total).rev() {
            counts[s] += counts[s - h];
        }
    }
    let hits: f64 = counts
        .iter()
        .enumerate()
        .filter(|(s, _)| (*s).min(total - s) <= t2)
        .map(|(_, c)| c)
        .sum();
    (hits / 2f64.powi(signed.len() as i32)).min(1.0)
}
