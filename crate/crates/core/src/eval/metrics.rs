use serde::{Deserialize, Serialize};

use super::EvalError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionMatrix {
    /// Tallies predictions against truth; 1 is the positive (buggy) class.
    pub fn from_predictions(truth: &[u8], predicted: &[u8]) -> Self {
        let mut m = Self::default();
        for (&t, &p) in truth.iter().zip(predicted) {
            match (t == 1, p == 1) {
                (true, true) => m.tp += 1,
                (false, true) => m.fp += 1,
                (false, false) => m.tn += 1,
                (true, false) => m.fn_ += 1,
            }
        }
        m
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn add(&self, other: &Self) -> Self {
        Self {
            tp: self.tp + other.tp,
            fp: self.fp + other.fp,
            tn: self.tn + other.tn,
            fn_: self.fn_ + other.fn_,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Scores {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f_measure: f64,
    pub mcc: f64,
}

fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// Harmonic mean of precision and recall; 0 when both are 0.
pub fn f_measure(precision: f64, recall: f64) -> f64 {
    ratio(2.0 * precision * recall, precision + recall)
}

pub fn classification_metrics(m: &ConfusionMatrix) -> Result<Scores, EvalError> {
    if m.total() == 0 {
        return Err(EvalError::EmptyMatrix);
    }
    let (tp, fp, tn, fn_) = (m.tp as f64, m.fp as f64, m.tn as f64, m.fn_ as f64);
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    let marginals = [tp + fp, tp + fn_, tn + fp, tn + fn_];
    let mcc = if marginals.contains(&0.0) {
        0.0
    } else {
        (tp * tn - fp * fn_) / marginals.iter().product::<f64>().sqrt()
    };
    Ok(Scores {
        accuracy: (tp + tn) / m.total() as f64,
        precision,
        recall,
        f_measure: f_measure(precision, recall),
        mcc,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_classifier() {
        let s = classification_metrics(&ConfusionMatrix {
            tp: 5,
            fp: 0,
            tn: 5,
            fn_: 0,
        })
        .unwrap();
        assert_eq!(
            (s.accuracy, s.precision, s.recall, s.f_measure, s.mcc),
            (1.0, 1.0, 1.0, 1.0, 1.0)
        );
    }

    #[test]
    fn zero_denominators() {
        let s = classification_metrics(&ConfusionMatrix {
            tp: 0,
            fp: 0,
            tn: 3,
            fn_: 2,
        })
        .unwrap();
        assert_eq!((s.precision, s.recall, s.f_measure, s.mcc), (0.0, 0.0, 0.0, 0.0));
        assert_eq!(s.accuracy, 0.6);
        assert_eq!(
            classification_metrics(&ConfusionMatrix::default()).unwrap_err(),
            EvalError::EmptyMatrix
        );
    }

    #[test]
    fn mcc_matches_definition() {
        let m = ConfusionMatrix {
            tp: 6,
            fp: 2,
            tn: 9,
            fn_: 3,
        };
        let s = classification_metrics(&m).unwrap();
        let expected = (6.0 * 9.0 - 2.0 * 3.0) / (8.0f64 * 9.0 * 11.0 * 12.0).sqrt();
        assert!((s.mcc - expected).abs() < 1e-15);
    }

    #[test]
    fn tally_predictions() {
        let m = ConfusionMatrix::from_predictions(&[1, 1, 0, 0, 1], &[1, 0, 1, 0, 1]);
        assert_eq!(
            m,
            ConfusionMatrix {
                tp: 2,
                fp: 1,
                tn: 1,
                fn_: 1
            }
        );
    }
}
