//! Discrete AdaBoost (SAMME, two classes) over shallow Gini trees.

use ndarray::ArrayView2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::tree::{Criterion, DecisionTree, TreeParams};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaBoostParams {
    pub n_estimators: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
}

/// Bookkeeping of one boosting round.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Round {
    /// Weighted training error of the round's learner.
    pub error: f64,
    pub alpha: f64,
    /// Sample-weight total after renormalization.
    pub weight_sum: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaBoost {
    pub trees: Vec<DecisionTree>,
    pub alphas: Vec<f64>,
    pub rounds: Vec<Round>,
}

impl AdaBoost {
    pub fn fit(x: ArrayView2<f64>, y: &[u8], p: AdaBoostParams, seed: u64) -> Result<Self> {
        let n = y.len();
        if n == 0 {
            return Err(Error::Training("no samples".into()));
        }
        if !(p.learning_rate > 0.0) || p.n_estimators == 0 {
            return Err(Error::Training("bad boosting parameters".into()));
        }
        let target: Vec<f64> = y.iter().map(|&v| v as f64).collect();
        let rows: Vec<usize> = (0..n).collect();
        let mut w = vec![1.0 / n as f64; n];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tp = TreeParams::new(p.max_depth, Criterion::Gini);
        let mut model = AdaBoost {
            trees: Vec::new(),
            alphas: Vec::new(),
            rounds: Vec::new(),
        };
        for m in 0..p.n_estimators {
            let tree = DecisionTree::fit(x, &target, &w, &rows, tp, &mut rng);
            let wrong: Vec<bool> = (0..n)
                .map(|i| {
                    let row = x.row(i);
                    let h = (tree.predict(row.as_slice().expect("contiguous")) >= 0.5) as u8;
                    h != y[i]
                })
                .collect();
            let total: f64 = w.iter().sum();
            let err: f64 = w.iter().zip(&wrong).filter(|(_, &b)| b).map(|(w, _)| w).sum::<f64>() / total;
            if err <= 0.0 {
                // perfect learner: keep it with unit weight and stop
                model.trees.push(tree);
                model.alphas.push(1.0);
                model.rounds.push(Round { error: 0.0, alpha: 1.0, weight_sum: 1.0 });
                break;
            }
            if err >= 0.5 {
                if m == 0 {
                    return Err(Error::Training(format!(
                        "first weak learner no better than chance (error {err:.4})"
                    )));
                }
                log::warn!("boosting stopped at round {m}: weak learner error {err:.4}");
                break;
            }
            let alpha = p.learning_rate * ((1.0 - err) / err).ln();
            for (wi, &bad) in w.iter_mut().zip(&wrong) {
                if bad {
                    *wi *= alpha.exp();
                }
            }
            let s: f64 = w.iter().sum();
            w.iter_mut().for_each(|v| *v /= s);
            model.trees.push(tree);
            model.alphas.push(alpha);
            model.rounds.push(Round {
                error: err,
                alpha,
                weight_sum: w.iter().sum(),
            });
        }
        Ok(model)
    }

    /// Weighted vote in [-1, 1].
    pub fn decision(&self, row: &[f64]) -> f64 {
        let (mut s, mut total) = (0.0, 0.0);
        for (t, &a) in self.trees.iter().zip(&self.alphas) {
            s += if t.predict(row) >= 0.5 { a } else { -a };
            total += a;
        }
        s / total
    }

    /// Crash score in [0, 1].
    pub fn score(&self, row: &[f64]) -> f64 {
        0.5 * (1.0 + self.decision(row))
    }
}
