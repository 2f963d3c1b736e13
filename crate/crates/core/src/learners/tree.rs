//! Axis-aligned binary decision trees grown on presorted feature orders.

use ndarray::ArrayView2;
use rand::seq::index::sample;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    Gini,
    Entropy,
    /// Weighted squared error, for regression targets.
    Mse,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
    /// Features drawn at every node; `None` uses all of them.
    pub max_features: Option<usize>,
    pub criterion: Criterion,
}

impl TreeParams {
    pub fn new(max_depth: usize, criterion: Criterion) -> Self {
        Self {
            max_depth,
            min_samples_split: 2,
            min_samples_leaf: 1,
            max_features: None,
            criterion,
        }
    }
}

const LEAF: u32 = u32::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Node {
    /// Split feature, or `u32::MAX` for a leaf.
    pub feature: u32,
    pub threshold: f64,
    pub left: u32,
    pub right: u32,
    /// Leaf output: positive-class fraction or regression value.
    pub value: f64,
}

impl Node {
    pub fn is_leaf(&self) -> bool {
        self.feature == LEAF
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub nodes: Vec<Node>,
}

/// Per-node sufficient statistics: total weight and weighted target sum
/// (the target is the 0/1 label for classification).
#[derive(Debug, Clone, Copy, Default)]
struct Stats {
    w: f64,
    wt: f64,
    wtt: f64,
}

impl Stats {
    fn add(&mut self, w: f64, t: f64) {
        self.w += w;
        self.wt += w * t;
        self.wtt += w * t * t;
    }

    fn sub(self, o: Stats) -> Stats {
        Stats {
            w: self.w - o.w,
            wt: self.wt - o.wt,
            wtt: self.wtt - o.wtt,
        }
    }

    /// Weight times impurity.
    fn cost(&self, c: Criterion) -> f64 {
        if self.w <= 0.0 {
            return 0.0;
        }
        match c {
            Criterion::Gini => {
                let p = (self.wt / self.w).clamp(0.0, 1.0);
                self.w * 2.0 * p * (1.0 - p)
            }
            Criterion::Entropy => {
                let p = (self.wt / self.w).clamp(0.0, 1.0);
                let h = |q: f64| if q > 0.0 { -q * q.log2() } else { 0.0 };
                self.w * (h(p) + h(1.0 - p))
            }
            Criterion::Mse => (self.wtt - self.wt * self.wt / self.w).max(0.0),
        }
    }

    fn pure(&self, c: Criterion) -> bool {
        match c {
            Criterion::Gini | Criterion::Entropy => self.wt <= 0.0 || self.wt >= self.w,
            Criterion::Mse => self.cost(c) <= 1e-12 * self.w.max(1.0),
        }
    }
}

struct Builder<'a> {
    x: ArrayView2<'a, f64>,
    target: &'a [f64],
    weight: &'a [f64],
    params: TreeParams,
    rng: &'a mut ChaCha8Rng,
    nodes: Vec<Node>,
    /// Row side flag, reused across splits.
    goes_left: Vec<bool>,
}

impl DecisionTree {
    /// Grows a tree on `rows` (duplicates allowed, e.g. a bootstrap sample).
    ///
    /// `target` holds 0/1 labels for the classification criteria and real values
    /// for [`Criterion::Mse`]; leaves store the weighted mean target.
    pub fn fit(
        x: ArrayView2<f64>,
        target: &[f64],
        weight: &[f64],
        rows: &[usize],
        params: TreeParams,
        rng: &mut ChaCha8Rng,
    ) -> DecisionTree {
        let n_features = x.ncols();
        // presorted row lists per feature
        let mut orders: Vec<Vec<usize>> = (0..n_features)
            .map(|f| {
                let mut o = rows.to_vec();
                o.sort_by(|&a, &b| x[[a, f]].total_cmp(&x[[b, f]]).then(a.cmp(&b)));
                o
            })
            .collect();
        let mut b = Builder {
            x,
            target,
            weight,
            params,
            rng,
            nodes: Vec::new(),
            goes_left: vec![false; x.nrows()],
        };
        b.grow(&mut orders, 0);
        DecisionTree { nodes: b.nodes }
    }

    /// Leaf index reached by `row`.
    pub fn leaf(&self, row: &[f64]) -> usize {
        let mut i = 0;
        loop {
            let n = &self.nodes[i];
            if n.is_leaf() {
                return i;
            }
            i = if row[n.feature as usize] <= n.threshold {
                n.left as usize
            } else {
                n.right as usize
            };
        }
    }

    pub fn predict(&self, row: &[f64]) -> f64 {
        self.nodes[self.leaf(row)].value
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            let n = &nodes[i];
            if n.is_leaf() {
                0
            } else {
                1 + walk(nodes, n.left as usize).max(walk(nodes, n.right as usize))
            }
        }
        walk(&self.nodes, 0)
    }

    /// Features used by at least one split.
    pub fn used_features(&self) -> Vec<usize> {
        let mut f: Vec<usize> = self
            .nodes
            .iter()
            .filter(|n| !n.is_leaf())
            .map(|n| n.feature as usize)
            .collect();
        f.sort_unstable();
        f.dedup();
        f
    }
}

impl Builder<'_> {
    fn stats(&self, rows: &[usize]) -> Stats {
        let mut s = Stats::default();
        for &r in rows {
            s.add(self.weight[r], self.target[r]);
        }
        s
    }

    fn grow(&mut self, orders: &mut [Vec<usize>], depth: usize) -> u32 {
        let rows = &orders[0];
        let total = self.stats(rows);
        let id = self.nodes.len() as u32;
        self.nodes.push(Node {
            feature: LEAF,
            threshold: 0.0,
            left: LEAF,
            right: LEAF,
            value: if total.w > 0.0 { total.wt / total.w } else { 0.0 },
        });
        let c = self.params.criterion;
        if depth >= self.params.max_depth
            || rows.len() < self.params.min_samples_split
            || rows.len() < 2 * self.params.min_samples_leaf
            || total.pure(c)
        {
            return id;
        }
        let Some((feature, threshold, split_pos)) = self.best_split(orders, total) else {
            return id;
        };

        // mark sides from the chosen feature's order, then partition every order
        for (k, &r) in orders[feature].iter().enumerate() {
            self.goes_left[r] = k < split_pos;
        }
        // duplicates of a row share its side because equal values never straddle the cut
        let mut left_orders = Vec::with_capacity(orders.len());
        let mut right_orders = Vec::with_capacity(orders.len());
        for o in orders.iter() {
            let (l, r): (Vec<usize>, Vec<usize>) = o.iter().partition(|&&r| self.goes_left[r]);
            left_orders.push(l);
            right_orders.push(r);
        }
        let left = self.grow(&mut left_orders, depth + 1);
        drop(left_orders);
        let right = self.grow(&mut right_orders, depth + 1);
        let node = &mut self.nodes[id as usize];
        node.feature = feature as u32;
        node.threshold = threshold;
        node.left = left;
        node.right = right;
        id
    }

    /// Best (feature, threshold, count of rows going left) over a feature draw.
    fn best_split(&mut self, orders: &[Vec<usize>], total: Stats) -> Option<(usize, f64, usize)> {
        let n_features = orders.len();
        let features: Vec<usize> = match self.params.max_features {
            Some(k) if k < n_features => {
                let mut f = sample(self.rng, n_features, k.max(1)).into_vec();
                f.sort_unstable();
                f
            }
            _ => (0..n_features).collect(),
        };
        let c = self.params.criterion;
        let parent = total.cost(c);
        let min_leaf = self.params.min_samples_leaf;
        let mut best: Option<(f64, usize, f64, usize)> = None;
        for f in features {
            let order = &orders[f];
            let n = order.len();
            let mut left = Stats::default();
            for k in 0..n - 1 {
                let r = order[k];
                left.add(self.weight[r], self.target[r]);
                let v = self.x[[r, f]];
                let next = self.x[[order[k + 1], f]];
                if next <= v || k + 1 < min_leaf || n - k - 1 < min_leaf {
                    continue;
                }
                let right = total.sub(left);
                let gain = parent - left.cost(c) - right.cost(c);
                if best.is_none_or(|b| gain > b.0 + 1e-12) {
                    let mut thr = v + (next - v) / 2.0;
                    if thr >= next {
                        thr = v;
                    }
                    best = Some((gain, f, thr, k + 1));
                }
            }
        }
        best.map(|(_, f, t, k)| (f, t, k))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;

    fn fit_cls(x: ndarray::Array2<f64>, y: &[f64], depth: usize, c: Criterion) -> DecisionTree {
        let w = vec![1.0; y.len()];
        let rows: Vec<usize> = (0..y.len()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        DecisionTree::fit(x.view(), y, &w, &rows, TreeParams::new(depth, c), &mut rng)
    }

    #[test]
    fn stump_separates_threshold() {
        let x = array![[0.0], [1.0], [2.0], [3.0]];
        let t = fit_cls(x, &[0.0, 0.0, 1.0, 1.0], 1, Criterion::Gini);
        assert_eq!(t.nodes[0].threshold, 1.5);
        assert_eq!(t.predict(&[0.5]), 0.0);
        assert_eq!(t.predict(&[2.5]), 1.0);
    }

    #[test]
    fn xor_needs_depth_two() {
        let x = array![[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]];
        let y = [0.0, 1.0, 1.0, 0.0];
        let t = fit_cls(x.clone(), &y, 2, Criterion::Entropy);
        for (row, &label) in x.rows().into_iter().zip(&y) {
            assert_eq!(t.predict(row.as_slice().unwrap()), label);
        }
        assert_eq!(t.depth(), 2);
    }

    #[test]
    fn depth_is_capped() {
        let x = ndarray::Array2::from_shape_fn((64, 1), |(i, _)| i as f64);
        let y: Vec<f64> = (0..64).map(|i| (i % 2) as f64).collect();
        let t = fit_cls(x, &y, 3, Criterion::Gini);
        assert!(t.depth() <= 3);
    }

    #[test]
    fn regression_leaves_hold_weighted_means() {
        let x = array![[0.0], [1.0], [10.0], [11.0]];
        let y = [1.0, 3.0, 30.0, 40.0];
        let w = [1.0, 1.0, 1.0, 3.0];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let t = DecisionTree::fit(x.view(), &y, &w, &[0, 1, 2, 3], TreeParams::new(1, Criterion::Mse), &mut rng);
        assert_eq!(t.predict(&[0.5]), 2.0);
        assert_eq!(t.predict(&[10.5]), 37.5);
    }

    #[test]
    fn constant_feature_gives_leaf() {
        let x = array![[1.0], [1.0], [1.0]];
        let t = fit_cls(x, &[0.0, 1.0, 1.0], 5, Criterion::Gini);
        assert_eq!(t.nodes.len(), 1);
        assert!((t.predict(&[1.0]) - 2.0 / 3.0).abs() < 1e-12);
    }
}
