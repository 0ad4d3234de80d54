use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::MlError;

/// Columns whose training standard deviation is at or below this are dropped.
pub const MIN_STDDEV: f64 = 1e-12;

/// Per-column standardization fitted on training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    /// Retained input columns, in order.
    pub kept: Vec<usize>,
    pub means: Vec<f64>,
    /// Population standard deviations of the retained columns.
    pub stddevs: Vec<f64>,
    /// Zero-variance columns that were dropped.
    pub dropped: Vec<usize>,
}

impl Standardizer {
    pub fn fit(x: &[Vec<f64>]) -> Result<Self, MlError> {
        if x.len() < 2 {
            return Err(MlError::TooFewRows(x.len()));
        }
        let width = super::check_matrix(x)?;
        let n = x.len() as f64;
        let mut s = Standardizer {
            kept: Vec::new(),
            means: Vec::new(),
            stddevs: Vec::new(),
            dropped: Vec::new(),
        };
        for j in 0..width {
            let mean = x.iter().map(|r| r[j]).sum::<f64>() / n;
            let var = x.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / n;
            let sd = var.sqrt();
            if sd <= MIN_STDDEV {
                s.dropped.push(j);
            } else {
                s.kept.push(j);
                s.means.push(mean);
                s.stddevs.push(sd);
            }
        }
        if !s.dropped.is_empty() {
            log::debug!("dropping zero-variance columns {:?}", s.dropped);
        }
        Ok(s)
    }

    pub fn apply_row(&self, row: &[f64]) -> Vec<f64> {
        self.kept
            .iter()
            .zip(self.means.iter().zip(&self.stddevs))
            .map(|(&j, (m, sd))| (row[j] - m) / sd)
            .collect()
    }

    pub fn apply(&self, x: &[Vec<f64>]) -> Vec<Vec<f64>> {
        x.iter().map(|r| self.apply_row(r)).collect()
    }
}

pub fn standardize_fit_transform(x: &[Vec<f64>]) -> Result<(Standardizer, Vec<Vec<f64>>), MlError> {
    let s = Standardizer::fit(x)?;
    let t = s.apply(x);
    Ok((s, t))
}

/// Appends minority rows drawn with replacement until the minority count is
/// `round(factor * original)`. The minority is the smaller class (label 1
/// on a tie). The original rows keep their order.
pub fn oversample_minority(
    x: &[Vec<f64>],
    y: &[u8],
    factor: f64,
    seed: u64,
) -> Result<(Vec<Vec<f64>>, Vec<u8>), MlError> {
    if !(factor >= 1.0 && factor.is_finite()) {
        return Err(MlError::BadOversampleFactor(factor));
    }
    let ones = y.iter().filter(|&&l| l == 1).count();
    let zeros = y.len() - ones;
    if ones == 0 || zeros == 0 {
        return Err(MlError::SingleClass);
    }
    let minority: u8 = if ones <= zeros { 1 } else { 0 };
    let pool: Vec<usize> = (0..y.len()).filter(|&i| y[i] == minority).collect();
    let target = (factor * pool.len() as f64).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut xo = x.to_vec();
    let mut yo = y.to_vec();
    for _ in pool.len()..target {
        let i = pool[rng.random_range(0..pool.len())];
        xo.push(x[i].clone());
        yo.push(minority);
    }
    Ok((xo, yo))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standardizes_with_population_stddev() {
        let x = vec![vec![1.0, 5.0], vec![2.0, 5.0], vec![3.0, 5.0]];
        let (s, t) = standardize_fit_transform(&x).unwrap();
        assert_eq!(s.dropped, vec![1]);
        let expected = [-1.224744871391589, 0.0, 1.224744871391589];
        for (row, e) in t.iter().zip(expected) {
            assert_eq!(row.len(), 1);
            assert!((row[0] - e).abs() < 1e-12);
        }
        assert_eq!(s.apply_row(&[4.0, 0.0]), vec![2.0 / (2.0f64 / 3.0).sqrt()]);
    }

    #[test]
    fn oversampling_counts() {
        let mut x = Vec::new();
        let mut y = Vec::new();
        for i in 0..14 {
            x.push(vec![i as f64]);
            y.push(u8::from(i < 4));
        }
        let (xo, yo) = oversample_minority(&x, &y, 1.5, 3).unwrap();
        assert_eq!(yo.iter().filter(|&&l| l == 1).count(), 6);
        assert_eq!(yo.iter().filter(|&&l| l == 0).count(), 10);
        assert_eq!(&xo[..14], &x[..]);
        assert_eq!((xo.clone(), yo.clone()), oversample_minority(&x, &y, 1.5, 3).unwrap());
        assert_eq!(oversample_minority(&x, &y, 1.0, 3).unwrap(), (x.clone(), y.clone()));
        assert_eq!(
            oversample_minority(&x, &[0; 14], 1.5, 3).unwrap_err(),
            MlError::SingleClass
        );
    }
}
