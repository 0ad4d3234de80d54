use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::grid::{Algorithm, HyperParams, ModelConfig};
use super::nn::{Mlp, MlpTraining};
use super::preprocess::Standardizer;
use super::tree::{Forest, Tree, TreeParams};
use super::{check_matrix, MlError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum LinearRule {
    /// sigmoid(z) >= 0.5
    Logistic,
    /// z >= 0.5
    LeastSquares,
    /// z > 0
    Margin,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Model {
    Constant(u8),
    Linear {
        w: Vec<f64>,
        b: f64,
        rule: LinearRule,
    },
    GaussianNb {
        log_prior: [f64; 2],
        mean: [Vec<f64>; 2],
        var: [Vec<f64>; 2],
    },
    Tree(Tree),
    Forest(Forest),
    Knn {
        x: Vec<Vec<f64>>,
        y: Vec<u8>,
        k: usize,
    },
    Mlp(Mlp),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub algorithm: Algorithm,
    pub model: Model,
    /// Applied to raw rows before prediction when present.
    pub preprocessor: Option<Standardizer>,
    /// Per-epoch training loss (networks only).
    pub loss_trace: Vec<f64>,
    pub diagnostics: Vec<String>,
}

fn dot(w: &[f64], x: &[f64]) -> f64 {
    w.iter().zip(x).map(|(a, b)| a * b).sum()
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

impl Model {
    pub fn predict(&self, row: &[f64]) -> u8 {
        match self {
            Model::Constant(l) => *l,
            Model::Linear { w, b, rule } => {
                let z = dot(w, row) + b;
                u8::from(match rule {
                    LinearRule::Logistic => sigmoid(z) >= 0.5,
                    LinearRule::LeastSquares => z >= 0.5,
                    LinearRule::Margin => z > 0.0,
                })
            }
            Model::GaussianNb {
                log_prior,
                mean,
                var,
            } => {
                let score = |c: usize| {
                    log_prior[c]
                        + row
                            .iter()
                            .zip(mean[c].iter().zip(&var[c]))
                            .map(|(x, (m, v))| {
                                -0.5 * (2.0 * std::f64::consts::PI * v).ln() - (x - m).powi(2) / (2.0 * v)
                            })
                            .sum::<f64>()
                };
                u8::from(score(1) > score(0))
            }
            Model::Tree(t) => t.predict(row),
            Model::Forest(f) => f.predict(row),
            Model::Knn { x, y, k } => {
                let mut d: Vec<(f64, usize)> = x
                    .iter()
                    .enumerate()
                    .map(|(i, r)| (r.iter().zip(row).map(|(a, b)| (a - b).powi(2)).sum(), i))
                    .collect();
                d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                let take = (*k).min(d.len());
                let ones = d[..take].iter().filter(|(_, i)| y[*i] == 1).count();
                u8::from(2 * ones > take)
            }
            Model::Mlp(m) => m.predict(row),
        }
    }
}

impl TrainedModel {
    pub fn predict(&self, row: &[f64]) -> u8 {
        match &self.preprocessor {
            Some(p) => self.model.predict(&p.apply_row(row)),
            None => self.model.predict(row),
        }
    }

    pub fn predict_all(&self, x: &[Vec<f64>]) -> Vec<u8> {
        x.iter().map(|r| self.predict(r)).collect()
    }
}

fn fit_logreg(x: &[Vec<f64>], y: &[u8], lr: f64, l2: f64, epochs: usize) -> Model {
    let (n, d) = (x.len() as f64, x[0].len());
    let mut w = vec![0.0; d];
    let mut b = 0.0;
    for _ in 0..epochs {
        let mut gw = vec![0.0; d];
        let mut gb = 0.0;
        for (r, &l) in x.iter().zip(y) {
            let err = sigmoid(dot(&w, r) + b) - f64::from(l);
            gb += err;
            for (g, v) in gw.iter_mut().zip(r) {
                *g += err * v;
            }
        }
        for (wj, g) in w.iter_mut().zip(&gw) {
            *wj -= lr * (g / n + l2 * *wj);
        }
        b -= lr * gb / n;
    }
    Model::Linear {
        w,
        b,
        rule: LinearRule::Logistic,
    }
}

/// Least squares with intercept through the ridge-regularized normal
/// equations, solved by Gaussian elimination with partial pivoting.
fn fit_linreg(x: &[Vec<f64>], y: &[u8], ridge: f64) -> Model {
    let m = x[0].len() + 1;
    let mut a = vec![vec![0.0; m + 1]; m];
    for (r, &l) in x.iter().zip(y) {
        let row: Vec<f64> = std::iter::once(1.0).chain(r.iter().copied()).collect();
        for i in 0..m {
            for j in 0..m {
                a[i][j] += row[i] * row[j];
            }
            a[i][m] += row[i] * f64::from(l);
        }
    }
    for (i, r) in a.iter_mut().enumerate() {
        r[i] += ridge;
    }
    for col in 0..m {
        let pivot = (col..m)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .expect("non-empty range");
        a.swap(col, pivot);
        if a[col][col].abs() < 1e-300 {
            continue;
        }
        for i in 0..m {
            if i != col {
                let f = a[i][col] / a[col][col];
                for j in col..=m {
                    a[i][j] -= f * a[col][j];
                }
            }
        }
    }
    let beta: Vec<f64> = (0..m)
        .map(|i| if a[i][i].abs() < 1e-300 { 0.0 } else { a[i][m] / a[i][i] })
        .collect();
    Model::Linear {
        w: beta[1..].to_vec(),
        b: beta[0],
        rule: LinearRule::LeastSquares,
    }
}

/// Minimizes `lambda/2 |w|^2 + mean(hinge)` by full-batch subgradient
/// descent with step `lr / sqrt(t)`; the bias is not regularized.
fn fit_svm(x: &[Vec<f64>], y: &[u8], lambda: f64, lr: f64, epochs: usize) -> Model {
    let (n, d) = (x.len() as f64, x[0].len());
    let mut w = vec![0.0; d];
    let mut b = 0.0;
    for t in 1..=epochs {
        let eta = lr / (t as f64).sqrt();
        let mut gw: Vec<f64> = w.iter().map(|v| lambda * v).collect();
        let mut gb = 0.0;
        for (r, &l) in x.iter().zip(y) {
            let s = if l == 1 { 1.0 } else { -1.0 };
            if s * (dot(&w, r) + b) < 1.0 {
                for (g, v) in gw.iter_mut().zip(r) {
                    *g -= s * v / n;
                }
                gb -= s / n;
            }
        }
        for (wj, g) in w.iter_mut().zip(&gw) {
            *wj -= eta * g;
        }
        b -= eta * gb;
    }
    Model::Linear {
        w,
        b,
        rule: LinearRule::Margin,
    }
}

fn fit_gaussian_nb(x: &[Vec<f64>], y: &[u8], var_floor: f64) -> Model {
    let d = x[0].len();
    let n = x.len() as f64;
    let class = |c: u8| {
        let rows: Vec<&Vec<f64>> = x.iter().zip(y).filter(|(_, &l)| l == c).map(|(r, _)| r).collect();
        let k = rows.len() as f64;
        let mean: Vec<f64> = (0..d).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / k).collect();
        let var: Vec<f64> = (0..d)
            .map(|j| {
                let v = rows.iter().map(|r| (r[j] - mean[j]).powi(2)).sum::<f64>() / k;
                v.max(var_floor)
            })
            .collect();
        ((k / n).ln(), mean, var)
    };
    let (p0, m0, v0) = class(0);
    let (p1, m1, v1) = class(1);
    Model::GaussianNb {
        log_prior: [p0, p1],
        mean: [m0, m1],
        var: [v0, v1],
    }
}

/// Trains one configuration on an already preprocessed matrix.
pub fn train(config: &ModelConfig, x: &[Vec<f64>], y: &[u8], seed: u64) -> Result<TrainedModel, MlError> {
    if x.len() != y.len() {
        return Err(MlError::LengthMismatch(x.len(), y.len()));
    }
    let width = check_matrix(x)?;
    let mut out = TrainedModel {
        algorithm: config.algorithm,
        model: Model::Constant(0),
        preprocessor: None,
        loss_trace: Vec::new(),
        diagnostics: Vec::new(),
    };
    let ones = y.iter().filter(|&&l| l == 1).count();
    if ones == 0 || ones == y.len() {
        let label = u8::from(ones > 0);
        out.model = Model::Constant(label);
        out.diagnostics
            .push(format!("single-class training data: constant predictor {label}"));
        return Ok(out);
    }
    if width == 0 {
        let label = u8::from(2 * ones > y.len());
        out.model = Model::Constant(label);
        out.diagnostics
            .push(format!("no usable features: majority predictor {label}"));
        return Ok(out);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    use HyperParams as H;
    out.model = match (config.algorithm, &config.hyper_params) {
        (Algorithm::Logreg, H::Logreg { learning_rate, l2, epochs }) => {
            fit_logreg(x, y, *learning_rate, *l2, *epochs)
        }
        (Algorithm::GaussianNb, H::GaussianNb { var_floor }) => fit_gaussian_nb(x, y, *var_floor),
        (Algorithm::Cart, H::Cart { max_depth, min_samples_split }) => Model::Tree(Tree::fit(
            x,
            y,
            (0..x.len()).collect(),
            TreeParams {
                max_depth: *max_depth,
                min_samples_split: *min_samples_split,
                max_features: None,
            },
            None,
        )),
        (Algorithm::Linreg, H::Linreg { ridge }) => fit_linreg(x, y, *ridge),
        (
            Algorithm::DnnStd | Algorithm::DnnEarly,
            H::Dnn {
                hidden,
                learning_rate,
                batch_size,
                epochs,
                early_stopping,
            },
        ) => {
            let t = MlpTraining {
                hidden: hidden.clone(),
                learning_rate: *learning_rate,
                batch_size: *batch_size,
                epochs: *epochs,
                early_stopping: *early_stopping,
            };
            let (net, trace) = Mlp::fit(x, y, &t, &mut rng);
            out.loss_trace = trace;
            Model::Mlp(net)
        }
        (Algorithm::LinearSvm, H::LinearSvm { lambda, learning_rate, epochs }) => {
            fit_svm(x, y, *lambda, *learning_rate, *epochs)
        }
        (Algorithm::Knn, H::Knn { k }) => Model::Knn {
            x: x.to_vec(),
            y: y.to_vec(),
            k: (*k).max(1),
        },
        (Algorithm::RandomForest, H::RandomForest { trees, max_depth }) => {
            Model::Forest(Forest::fit(x, y, (*trees).max(1), *max_depth, &mut rng))
        }
        (a, _) => return Err(MlError::HyperParamMismatch(a)),
    };
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ml::grid::enumerate_configs;

    fn blobs() -> (Vec<Vec<f64>>, Vec<u8>) {
        let mut x = Vec::new();
        let mut y = Vec::new();
        for i in 0..40 {
            let jitter = ((i * 37) % 11) as f64 / 11.0 - 0.5;
            let c = (i % 2) as f64;
            x.push(vec![4.0 * c - 2.0 + jitter, 1.5 * c + jitter * 0.5]);
            y.push((i % 2) as u8);
        }
        (x, y)
    }

    #[test]
    fn every_config_fits_separable_data() {
        let (x, y) = blobs();
        for c in enumerate_configs() {
            let m = train(&c, &x, &y, 7).unwrap();
            let pred = m.predict_all(&x);
            let correct = pred.iter().zip(&y).filter(|(a, b)| a == b).count();
            assert!(correct >= 38, "{} config {}: {correct}/40", c.algorithm, c.config_id);
        }
    }

    #[test]
    fn single_class_gives_constant_predictor() {
        let (x, _) = blobs();
        let c = &enumerate_configs()[0];
        let m = train(c, &x, &[1; 40], 0).unwrap();
        assert_eq!(m.model, Model::Constant(1));
        assert_eq!(m.diagnostics.len(), 1);
    }

    #[test]
    fn knn_ties_go_to_lower_index_then_zero() {
        let m = Model::Knn {
            x: vec![vec![1.0], vec![-1.0], vec![3.0]],
            y: vec![1, 0, 1],
            k: 1,
        };
        assert_eq!(m.predict(&[0.0]), 1);
        let m2 = Model::Knn {
            x: vec![vec![1.0], vec![-1.0]],
            y: vec![1, 0],
            k: 2,
        };
        assert_eq!(m2.predict(&[0.0]), 0);
    }

    #[test]
    fn mismatched_hyper_params_rejected() {
        let mut c = enumerate_configs()[0].clone();
        c.algorithm = Algorithm::Knn;
        let (x, y) = blobs();
        assert_eq!(
            train(&c, &x, &y, 0).unwrap_err(),
            MlError::HyperParamMismatch(Algorithm::Knn)
        );
    }
}
