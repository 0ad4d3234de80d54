//! Fully connected network: ReLU hidden layers, one sigmoid output, binary
//! cross-entropy, Adam, mini-batches.

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::grid::EarlyStopping;

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const EPS: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Layer {
    inputs: usize,
    outputs: usize,
    /// Row-major `outputs × inputs`.
    w: Vec<f64>,
    b: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    layers: Vec<Layer>,
}

pub struct MlpTraining {
    pub hidden: Vec<usize>,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub early_stopping: Option<EarlyStopping>,
}

/// Per-parameter Adam state, laid out like the layers.
struct Moments {
    m: Vec<(Vec<f64>, Vec<f64>)>,
    v: Vec<(Vec<f64>, Vec<f64>)>,
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

impl Mlp {
    fn new(widths: &[usize], rng: &mut ChaCha8Rng) -> Mlp {
        let layers = widths
            .windows(2)
            .map(|w| {
                let (inputs, outputs) = (w[0], w[1]);
                let he = Normal::new(0.0, (2.0 / inputs as f64).sqrt()).expect("positive std");
                Layer {
                    inputs,
                    outputs,
                    w: (0..inputs * outputs).map(|_| he.sample(rng)).collect(),
                    b: vec![0.0; outputs],
                }
            })
            .collect();
        Mlp { layers }
    }

    /// Activations of every layer, input first. The last one is the
    /// single sigmoid output.
    fn forward(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let mut acts = vec![x.to_vec()];
        let last = self.layers.len() - 1;
        for (li, l) in self.layers.iter().enumerate() {
            let input = &acts[li];
            let out: Vec<f64> = (0..l.outputs)
                .map(|o| {
                    let row = &l.w[o * l.inputs..(o + 1) * l.inputs];
                    let z = l.b[o] + row.iter().zip(input).map(|(w, x)| w * x).sum::<f64>();
                    if li == last {
                        sigmoid(z)
                    } else {
                        z.max(0.0)
                    }
                })
                .collect();
            acts.push(out);
        }
        acts
    }

    pub fn probability(&self, x: &[f64]) -> f64 {
        self.forward(x).last().expect("output layer")[0]
    }

    pub fn predict(&self, x: &[f64]) -> u8 {
        u8::from(self.probability(x) >= 0.5)
    }

    /// Trains and returns the network with its per-epoch mean training loss.
    /// With early stopping, training ends once the loss has not improved by
    /// more than `min_delta` for `patience` epochs, and the best weights are
    /// restored.
    pub fn fit(x: &[Vec<f64>], y: &[u8], t: &MlpTraining, rng: &mut ChaCha8Rng) -> (Mlp, Vec<f64>) {
        let mut widths = vec![x[0].len()];
        widths.extend(&t.hidden);
        widths.push(1);
        let mut net = Mlp::new(&widths, rng);
        let zeros = |net: &Mlp| -> Vec<(Vec<f64>, Vec<f64>)> {
            net.layers
                .iter()
                .map(|l| (vec![0.0; l.w.len()], vec![0.0; l.b.len()]))
                .collect()
        };
        let mut adam = Moments {
            m: zeros(&net),
            v: zeros(&net),
        };
        let mut step = 0i32;
        let mut order: Vec<usize> = (0..x.len()).collect();
        let mut trace = Vec::new();
        let mut best = (f64::INFINITY, net.clone());
        let mut waited = 0;
        for _ in 0..t.epochs {
            order.shuffle(rng);
            let mut loss_sum = 0.0;
            for batch in order.chunks(t.batch_size.max(1)) {
                let mut grads = zeros(&net);
                for &i in batch {
                    loss_sum += net.accumulate(&x[i], y[i], &mut grads);
                }
                step += 1;
                net.adam_step(&grads, batch.len(), t.learning_rate, step, &mut adam);
            }
            let loss = loss_sum / x.len() as f64;
            trace.push(loss);
            if let Some(es) = t.early_stopping {
                if loss < best.0 - es.min_delta {
                    best = (loss, net.clone());
                    waited = 0;
                } else {
                    waited += 1;
                    if waited >= es.patience {
                        break;
                    }
                }
            }
        }
        if t.early_stopping.is_some() && best.0.is_finite() {
            net = best.1;
        }
        (net, trace)
    }

    /// Adds one sample's gradient; returns its loss.
    fn accumulate(&self, x: &[f64], y: u8, grads: &mut [(Vec<f64>, Vec<f64>)]) -> f64 {
        let acts = self.forward(x);
        let p = acts.last().expect("output")[0].clamp(1e-12, 1.0 - 1e-12);
        let target = f64::from(y);
        let loss = -(target * p.ln() + (1.0 - target) * (1.0 - p).ln());
        // dL/dz at the sigmoid output
        let mut delta = vec![p - target];
        for li in (0..self.layers.len()).rev() {
            let l = &self.layers[li];
            let input = &acts[li];
            let (gw, gb) = &mut grads[li];
            for o in 0..l.outputs {
                gb[o] += delta[o];
                for k in 0..l.inputs {
                    gw[o * l.inputs + k] += delta[o] * input[k];
                }
            }
            if li > 0 {
                delta = (0..l.inputs)
                    .map(|k| {
                        if input[k] <= 0.0 {
                            0.0
                        } else {
                            (0..l.outputs).map(|o| l.w[o * l.inputs + k] * delta[o]).sum()
                        }
                    })
                    .collect();
            }
        }
        loss
    }

    fn adam_step(&mut self, grads: &[(Vec<f64>, Vec<f64>)], batch: usize, lr: f64, step: i32, s: &mut Moments) {
        let scale = 1.0 / batch as f64;
        let c1 = 1.0 - BETA1.powi(step);
        let c2 = 1.0 - BETA2.powi(step);
        let update = |params: &mut [f64], g: &[f64], m: &mut [f64], v: &mut [f64]| {
            for i in 0..params.len() {
                let gi = g[i] * scale;
                m[i] = BETA1 * m[i] + (1.0 - BETA1) * gi;
                v[i] = BETA2 * v[i] + (1.0 - BETA2) * gi * gi;
                params[i] -= lr * (m[i] / c1) / ((v[i] / c2).sqrt() + EPS);
            }
        };
        for (li, l) in self.layers.iter_mut().enumerate() {
            let (mw, mb) = &mut s.m[li];
            let (vw, vb) = &mut s.v[li];
            update(&mut l.w, &grads[li].0, mw, vw);
            update(&mut l.b, &grads[li].1, mb, vb);
        }
    }
}
