//! Hyperparameter grid search under scenario-grouped k-fold cross-validation.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learners::{decide, is_integer_hyper, train_samples, ModelKind, ModelSpec};
use crate::telemetry::{Samples, SignalDataset};

/// Harmonic mean of precision and recall; 0 when either is undefined.
pub fn f1(tp: usize, fp: usize, fn_: usize) -> f64 {
    if tp + fp == 0 || tp + fn_ == 0 {
        log::warn!("F1 undefined (tp={tp}, fp={fp}, fn={fn_}); scoring 0");
        return 0.0;
    }
    2.0 * tp as f64 / (2 * tp + fp + fn_) as f64
}

/// F1 of binary predictions.
pub fn f1_of(truth: &[u8], pred: &[u8]) -> f64 {
    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    for (&t, &p) in truth.iter().zip(pred) {
        match (t, p) {
            (1, 1) => tp += 1,
            (0, 1) => fp += 1,
            (1, 0) => fn_ += 1,
            _ => {}
        }
    }
    f1(tp, fp, fn_)
}

/// Assignment of scenarios to cross-validation folds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvPlan {
    pub k: usize,
    /// Scenario id → fold.
    pub folds: BTreeMap<String, usize>,
}

impl CvPlan {
    pub fn fold_of(&self, scenario: &str) -> Option<usize> {
        self.folds.get(scenario).copied()
    }

    pub fn members(&self, fold: usize) -> Vec<&str> {
        self.folds
            .iter()
            .filter(|(_, &f)| f == fold)
            .map(|(id, _)| id.as_str())
            .collect()
    }
}

/// Shuffles scenarios per seed and deals them round-robin into `k` folds,
/// crash scenarios first so every fold sees both classes when counts allow.
pub fn make_folds(train: &SignalDataset, k: usize, seed: u64) -> Result<CvPlan> {
    let n = train.streams.len();
    if k < 2 {
        return Err(Error::validation("need at least 2 folds"));
    }
    if n < k {
        return Err(Error::validation(format!("{n} scenarios cannot fill {k} folds")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut folds = BTreeMap::new();
    let mut next = 0;
    for crash in [true, false] {
        let mut ids: Vec<&str> = train
            .streams
            .iter()
            .filter(|s| s.is_crash() == crash)
            .map(|s| s.scenario_id.as_str())
            .collect();
        ids.shuffle(&mut rng);
        for id in ids {
            if folds.insert(id.to_string(), next % k).is_some() {
                return Err(Error::validation(format!("duplicate scenario `{id}`")));
            }
            next += 1;
        }
    }
    Ok(CvPlan { k, folds })
}

/// Candidate values per hyperparameter plus the refinement schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub axes: BTreeMap<String, Vec<f64>>,
    /// Refinement rounds after the initial sweep.
    pub max_rounds: usize,
    /// Minimum mean-F1 gain for another round.
    pub min_improvement: f64,
}

impl Grid {
    pub fn new(axes: BTreeMap<String, Vec<f64>>) -> Self {
        Self {
            axes,
            max_rounds: 4,
            min_improvement: 1e-4,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, vals) in &self.axes {
            if vals.is_empty() || vals.iter().any(|v| !v.is_finite()) {
                return Err(Error::validation(format!("grid axis `{name}` needs finite candidates")));
            }
        }
        Ok(())
    }

    /// Cartesian product in lexicographic axis order.
    pub fn cells(&self) -> Vec<BTreeMap<String, f64>> {
        let mut out = vec![BTreeMap::new()];
        for (name, vals) in &self.axes {
            let mut vals = vals.clone();
            vals.sort_by(f64::total_cmp);
            vals.dedup();
            out = out
                .into_iter()
                .flat_map(|cell| {
                    vals.iter().map(move |&v| {
                        let mut c = cell.clone();
                        c.insert(name.clone(), v);
                        c
                    })
                })
                .collect();
        }
        out
    }

    /// Narrows every axis to the span between the incumbent's neighbours,
    /// adding geometric midpoints (arithmetic across zero); count-valued
    /// hyperparameters stay integer.
    pub fn refine(&self, incumbent: &BTreeMap<String, f64>) -> Grid {
        let axes = self
            .axes
            .iter()
            .map(|(name, vals)| {
                let mut v = vals.clone();
                v.sort_by(f64::total_cmp);
                v.dedup();
                let x = incumbent[name];
                let i = v.iter().position(|&c| c == x).unwrap_or(0);
                let lo = v[i.saturating_sub(1)];
                let hi = v[(i + 1).min(v.len() - 1)];
                let mid = |a: f64, b: f64| {
                    if a > 0.0 && b > 0.0 {
                        (a * b).sqrt()
                    } else {
                        (a + b) / 2.0
                    }
                };
                let mut next = vec![lo, mid(lo, x), x, mid(x, hi), hi];
                if is_integer_hyper(name) {
                    next.iter_mut().for_each(|c| *c = c.round());
                }
                next.sort_by(f64::total_cmp);
                next.dedup();
                (name.clone(), next)
            })
            .collect();
        Grid { axes, ..self.clone() }
    }
}

/// Cross-validated score of one grid cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellScore {
    pub round: usize,
    pub hyper: BTreeMap<String, f64>,
    pub fold_f1: Vec<f64>,
    pub mean_f1: f64,
    /// Training failure message; such cells score 0.
    pub failed: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub kind: ModelKind,
    pub best: BTreeMap<String, f64>,
    pub best_score: f64,
    pub table: Vec<CellScore>,
}

impl SearchResult {
    /// Score table as CSV, one row per evaluated cell.
    pub fn to_csv(&self) -> String {
        let names: BTreeSet<&String> = self.table.iter().flat_map(|c| c.hyper.keys()).collect();
        let mut s = String::from("round");
        for n in &names {
            s.push(',');
            s.push_str(n);
        }
        s.push_str(",mean_f1,failed\n");
        for c in &self.table {
            s.push_str(&c.round.to_string());
            for n in &names {
                s.push(',');
                if let Some(v) = c.hyper.get(*n) {
                    s.push_str(&v.to_string());
                }
            }
            s.push_str(&format!(",{},{}\n", c.mean_f1, c.failed.is_some() as u8));
        }
        s
    }
}

/// Training and validation rows of fold `f`.
pub fn fold_partition(
    data: &Samples,
    fold_of_group: &[usize],
    f: usize,
) -> (Samples, Samples) {
    (
        data.select_groups(|g| fold_of_group[g] != f),
        data.select_groups(|g| fold_of_group[g] == f),
    )
}

/// Fold index per stream of `ds`.
pub fn stream_folds(ds: &SignalDataset, plan: &CvPlan) -> Result<Vec<usize>> {
    ds.streams
        .iter()
        .map(|s| {
            plan.fold_of(&s.scenario_id)
                .ok_or_else(|| Error::validation(format!("scenario `{}` has no fold", s.scenario_id)))
        })
        .collect()
}

fn evaluate_cell(
    spec: &ModelSpec,
    data: &Samples,
    folds: &[usize],
    k: usize,
) -> (Vec<f64>, Option<String>) {
    let results: Vec<Result<f64>> = (0..k)
        .into_par_iter()
        .map(|f| {
            let (tr, va) = fold_partition(data, folds, f);
            if va.is_empty() {
                return Ok(0.0);
            }
            let model = train_samples(spec, &tr)?;
            let scores = model.score_matrix(&va.x)?;
            let pred: Vec<u8> = scores.iter().map(|&s| decide(s, 0.5)).collect();
            Ok(f1_of(&va.y, &pred))
        })
        .collect();
    let mut failed = None;
    let scores = results
        .into_iter()
        .map(|r| {
            r.unwrap_or_else(|e| {
                failed.get_or_insert_with(|| e.to_string());
                0.0
            })
        })
        .collect();
    (scores, failed)
}

/// Exhaustive search with incumbent-centred refinement; the best mean fold F1
/// wins, ties going to the cheaper model.
pub fn grid_search(
    kind: ModelKind,
    grid: &Grid,
    train: &SignalDataset,
    plan: &CvPlan,
    seed: u64,
) -> Result<SearchResult> {
    grid.validate()?;
    let data = train.to_samples();
    let folds = stream_folds(train, plan)?;
    let mut table: Vec<CellScore> = Vec::new();
    let mut seen: BTreeSet<String> = BTreeSet::new();
    let mut grid = grid.clone();
    let mut best: Option<(f64, f64, BTreeMap<String, f64>)> = None;
    for round in 0..=grid.max_rounds {
        let before = best.as_ref().map(|b| b.0);
        let mut new_cells = 0;
        for cell in grid.cells() {
            let key = format!("{cell:?}");
            if !seen.insert(key) {
                continue;
            }
            new_cells += 1;
            let spec = ModelSpec::new(kind, cell.clone(), seed);
            let (fold_f1, failed) = match spec.validate() {
                Ok(()) => evaluate_cell(&spec, &data, &folds, plan.k),
                Err(e) => (vec![0.0; plan.k], Some(e.to_string())),
            };
            if let Some(msg) = &failed {
                log::warn!("{kind} cell {cell:?} failed: {msg}");
            }
            let mean = fold_f1.iter().sum::<f64>() / fold_f1.len() as f64;
            let cost = spec.complexity();
            let better = match &best {
                None => true,
                Some((s, c, _)) => mean > *s + 1e-12 || ((mean - s).abs() <= 1e-12 && cost < *c),
            };
            if better {
                best = Some((mean, cost, cell.clone()));
            }
            table.push(CellScore {
                round,
                hyper: cell,
                fold_f1,
                mean_f1: mean,
                failed,
            });
        }
        let (score, _, inc) = best.as_ref().expect("grid has cells");
        let gained = before.is_none_or(|b| score - b > grid.min_improvement);
        if new_cells == 0 || (round > 0 && !gained) {
            break;
        }
        grid = grid.refine(inc);
    }
    let (best_score, _, best) = best.expect("grid has cells");
    debug_assert!(table.iter().all(|c| c.mean_f1 <= best_score));
    Ok(SearchResult {
        kind,
        best,
        best_score,
        table,
    })
}
