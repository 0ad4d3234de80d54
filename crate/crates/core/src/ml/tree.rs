//! CART classification trees (Gini) and bagged random forests.
//!
//! For two classes the weighted Gini impurity of a split is proportional to
//! `aL·bL/nL + aR·bR/nR` (a, b = class counts), so candidate splits are
//! compared exactly as fractions of integers. Equal scores keep the first
//! candidate: lowest feature index, then lowest threshold.

use rand::seq::index::sample;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum Node {
    Leaf(u8),
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    nodes: Vec<Node>,
}

#[derive(Debug, Clone, Copy)]
pub struct TreeParams {
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    /// Features examined per split; `None` means all.
    pub max_features: Option<usize>,
}

/// Split quality `num / den`; smaller is better.
#[derive(Clone, Copy)]
struct Score {
    num: u128,
    den: u128,
}

impl Score {
    fn less_than(&self, other: &Score) -> bool {
        self.num * other.den < other.num * self.den
    }
}

fn class_counts(y: &[u8], idx: &[usize]) -> (u128, u128) {
    let ones = idx.iter().filter(|&&i| y[i] == 1).count() as u128;
    (idx.len() as u128 - ones, ones)
}

impl Tree {
    /// Fits on the rows `idx` of `x` (duplicates allowed, as in a bootstrap).
    pub fn fit(
        x: &[Vec<f64>],
        y: &[u8],
        idx: Vec<usize>,
        params: TreeParams,
        mut rng: Option<&mut ChaCha8Rng>,
    ) -> Tree {
        let mut tree = Tree { nodes: Vec::new() };
        tree.build(x, y, idx, 0, params, &mut rng);
        tree
    }

    fn build(
        &mut self,
        x: &[Vec<f64>],
        y: &[u8],
        idx: Vec<usize>,
        depth: usize,
        params: TreeParams,
        rng: &mut Option<&mut ChaCha8Rng>,
    ) -> usize {
        let slot = self.nodes.len();
        let (a, b) = class_counts(y, &idx);
        self.nodes.push(Node::Leaf(u8::from(b > a)));
        let n = idx.len();
        if a == 0
            || b == 0
            || n < params.min_samples_split.max(2)
            || params.max_depth.is_some_and(|d| depth >= d)
        {
            return slot;
        }
        let width = x[idx[0]].len();
        let features: Vec<usize> = match (params.max_features, rng.as_deref_mut()) {
            (Some(m), Some(r)) if m < width => {
                let mut f = sample(r, width, m).into_vec();
                f.sort_unstable();
                f
            }
            _ => (0..width).collect(),
        };

        let parent = Score {
            num: a * b,
            den: n as u128,
        };
        let mut best: Option<(Score, usize, f64)> = None;
        let mut order = idx.clone();
        for &f in &features {
            order.sort_by(|&i, &j| x[i][f].total_cmp(&x[j][f]));
            let (mut al, mut bl) = (0u128, 0u128);
            for p in 0..n - 1 {
                if y[order[p]] == 1 {
                    bl += 1;
                } else {
                    al += 1;
                }
                let (lo, hi) = (x[order[p]][f], x[order[p + 1]][f]);
                if lo >= hi {
                    continue;
                }
                let (nl, nr) = (al + bl, n as u128 - al - bl);
                let (ar, br) = (a - al, b - bl);
                let score = Score {
                    num: al * bl * nr + ar * br * nl,
                    den: nl * nr,
                };
                if best.as_ref().is_none_or(|(s, _, _)| score.less_than(s)) {
                    let mid = lo + (hi - lo) / 2.0;
                    let threshold = if mid < hi { mid } else { lo };
                    best = Some((score, f, threshold));
                }
            }
        }
        let Some((score, feature, threshold)) = best else {
            return slot;
        };
        if !score.less_than(&parent) {
            return slot;
        }
        let (left_idx, right_idx): (Vec<usize>, Vec<usize>) =
            idx.into_iter().partition(|&i| x[i][feature] <= threshold);
        let left = self.build(x, y, left_idx, depth + 1, params, rng);
        let right = self.build(x, y, right_idx, depth + 1, params, rng);
        self.nodes[slot] = Node::Split {
            feature,
            threshold,
            left,
            right,
        };
        slot
    }

    pub fn predict(&self, row: &[f64]) -> u8 {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf(label) => return *label,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if row[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], at: usize) -> usize {
            match &nodes[at] {
                Node::Leaf(_) => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    trees: Vec<Tree>,
}

impl Forest {
    /// Bagged trees with `floor(sqrt(d))` (at least 1) features per split.
    pub fn fit(x: &[Vec<f64>], y: &[u8], trees: usize, max_depth: Option<usize>, rng: &mut ChaCha8Rng) -> Forest {
        let n = x.len();
        let width = x[0].len();
        let params = TreeParams {
            max_depth,
            min_samples_split: 2,
            max_features: Some(((width as f64).sqrt().floor() as usize).max(1)),
        };
        let trees = (0..trees)
            .map(|_| {
                let idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
                Tree::fit(x, y, idx, params, Some(rng))
            })
            .collect();
        Forest { trees }
    }

    /// Majority vote; a tied vote predicts 0.
    pub fn predict(&self, row: &[f64]) -> u8 {
        let ones = self.trees.iter().filter(|t| t.predict(row) == 1).count();
        u8::from(2 * ones > self.trees.len())
    }
}
