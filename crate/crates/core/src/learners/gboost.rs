//! Gradient boosting of regression trees under the exponential loss.

use ndarray::ArrayView2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::tree::{Criterion, DecisionTree, TreeParams};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GBoostParams {
    pub n_estimators: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientBoost {
    pub init: f64,
    pub learning_rate: f64,
    pub trees: Vec<DecisionTree>,
    /// Mean training loss after each stage.
    pub train_loss: Vec<f64>,
}

impl GradientBoost {
    pub fn fit(x: ArrayView2<f64>, y: &[u8], p: GBoostParams, seed: u64) -> Result<Self> {
        let n = y.len();
        if n == 0 || p.n_estimators == 0 || !(p.learning_rate > 0.0) {
            return Err(Error::Training("bad boosting input".into()));
        }
        let pos = y.iter().filter(|&&v| v == 1).count();
        if pos == 0 || pos == n {
            return Err(Error::Training("gradient boosting needs both classes".into()));
        }
        let prior = pos as f64 / n as f64;
        let init = 0.5 * (prior / (1.0 - prior)).ln();
        let ys: Vec<f64> = y.iter().map(|&v| 2.0 * v as f64 - 1.0).collect();
        let mut f = vec![init; n];
        let ones = vec![1.0; n];
        let rows: Vec<usize> = (0..n).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tp = TreeParams::new(p.max_depth, Criterion::Mse);
        let mut trees = Vec::with_capacity(p.n_estimators);
        let mut train_loss = Vec::with_capacity(p.n_estimators);
        let row = |i: usize| x.row(i).to_slice().expect("contiguous");
        for _ in 0..p.n_estimators {
            let resid: Vec<f64> = (0..n).map(|i| ys[i] * (-ys[i] * f[i]).exp()).collect();
            let mut tree = DecisionTree::fit(x, &resid, &ones, &rows, tp, &mut rng);
            // Newton step per leaf
            let mut num = vec![0.0; tree.nodes.len()];
            let mut den = vec![0.0; tree.nodes.len()];
            let leaves: Vec<usize> = (0..n).map(|i| tree.leaf(row(i))).collect();
            for i in 0..n {
                let e = (-ys[i] * f[i]).exp();
                num[leaves[i]] += ys[i] * e;
                den[leaves[i]] += e;
            }
            for (k, node) in tree.nodes.iter_mut().enumerate() {
                if node.is_leaf() {
                    node.value = if den[k] > 1e-150 { num[k] / den[k] } else { 0.0 };
                }
            }
            for i in 0..n {
                f[i] += p.learning_rate * tree.nodes[leaves[i]].value;
            }
            train_loss.push((0..n).map(|i| (-ys[i] * f[i]).exp()).sum::<f64>() / n as f64);
            trees.push(tree);
        }
        Ok(Self {
            init,
            learning_rate: p.learning_rate,
            trees,
            train_loss,
        })
    }

    pub fn decision(&self, row: &[f64]) -> f64 {
        self.init + self.learning_rate * self.trees.iter().map(|t| t.predict(row)).sum::<f64>()
    }

    /// Crash probability implied by the exponential loss.
    pub fn score(&self, row: &[f64]) -> f64 {
        1.0 / (1.0 + (-2.0 * self.decision(row)).exp())
    }
}
