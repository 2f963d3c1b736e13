//! Random forest of entropy trees.

use ndarray::ArrayView2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::tree::{Criterion, DecisionTree, TreeParams};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForestParams {
    pub n_estimators: usize,
    pub max_depth: usize,
    pub bootstrap: bool,
    /// Features drawn per node; `None` means ⌊√d⌋.
    pub max_features: Option<usize>,
}

impl ForestParams {
    pub fn tree_params(&self, n_features: usize) -> TreeParams {
        let k = self
            .max_features
            .unwrap_or_else(|| ((n_features as f64).sqrt() as usize).max(1));
        TreeParams {
            max_features: Some(k),
            ..TreeParams::new(self.max_depth, Criterion::Entropy)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    pub trees: Vec<DecisionTree>,
}

/// Seed of the `k`-th tree; each tree owns its random stream.
pub fn tree_seed(seed: u64, k: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(k as u64)
}

impl RandomForest {
    pub fn fit(x: ArrayView2<f64>, y: &[u8], p: ForestParams, seed: u64) -> Result<Self> {
        let n = y.len();
        if n == 0 || p.n_estimators == 0 {
            return Err(Error::Training("bad forest input".into()));
        }
        let target: Vec<f64> = y.iter().map(|&v| v as f64).collect();
        let w = vec![1.0; n];
        let tp = p.tree_params(x.ncols());
        let trees = (0..p.n_estimators)
            .map(|k| {
                let mut rng = ChaCha8Rng::seed_from_u64(tree_seed(seed, k));
                let rows: Vec<usize> = if p.bootstrap {
                    (0..n).map(|_| rng.random_range(0..n)).collect()
                } else {
                    (0..n).collect()
                };
                DecisionTree::fit(x, &target, &w, &rows, tp, &mut rng)
            })
            .collect();
        Ok(Self { trees })
    }

    /// Mean leaf crash fraction over trees.
    pub fn score(&self, row: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.predict(row)).sum::<f64>() / self.trees.len() as f64
    }
}
