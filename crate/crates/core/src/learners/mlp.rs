//! One-hidden-layer ReLU perceptron with a sigmoid output, trained by Adam on
//! the L2-regularized cross-entropy.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MlpParams {
    pub hidden: usize,
    pub learning_rate: f64,
    pub alpha: f64,
    pub batch_size: usize,
    pub max_iter: usize,
    pub tol: f64,
    pub n_iter_no_change: usize,
    pub early_stopping: bool,
    pub validation_fraction: f64,
}

impl Default for MlpParams {
    fn default() -> Self {
        Self {
            hidden: 100,
            learning_rate: 1e-3,
            alpha: 1e-4,
            batch_size: 200,
            max_iter: 200,
            tol: 1e-4,
            n_iter_no_change: 10,
            early_stopping: true,
            validation_fraction: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub n_in: usize,
    pub n_hidden: usize,
    /// Input weights, hidden-major (`n_hidden x n_in`).
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: f64,
    pub epochs: usize,
    pub converged: bool,
    /// Mean training loss per epoch.
    pub loss_curve: Vec<f64>,
    /// Held-out accuracy per epoch (empty without early stopping).
    pub validation_scores: Vec<f64>,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// log(1 + e^z) without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

impl Mlp {
    /// Glorot-uniform initialization.
    pub fn init(n_in: usize, n_hidden: usize, rng: &mut impl Rng) -> Self {
        let b1 = (6.0 / (n_in + n_hidden) as f64).sqrt();
        let b2 = (2.0 / (n_hidden + 1) as f64).sqrt();
        let mut u = |b: f64| rng.random_range(-b..b);
        Self {
            n_in,
            n_hidden,
            w1: (0..n_in * n_hidden).map(|_| u(b1)).collect(),
            b1: (0..n_hidden).map(|_| u(b1)).collect(),
            w2: (0..n_hidden).map(|_| u(b2)).collect(),
            b2: u(b2),
            epochs: 0,
            converged: false,
            loss_curve: Vec::new(),
            validation_scores: Vec::new(),
        }
    }

    pub fn n_params(&self) -> usize {
        self.n_hidden * (self.n_in + 2) + 1
    }

    /// Flat parameters: `w1`, `b1`, `w2`, `b2`.
    pub fn params(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.n_params());
        p.extend(&self.w1);
        p.extend(&self.b1);
        p.extend(&self.w2);
        p.push(self.b2);
        p
    }

    pub fn set_params(&mut self, p: &[f64]) {
        let (h, d) = (self.n_hidden, self.n_in);
        self.w1.copy_from_slice(&p[..h * d]);
        self.b1.copy_from_slice(&p[h * d..h * d + h]);
        self.w2.copy_from_slice(&p[h * d + h..h * d + 2 * h]);
        self.b2 = p[h * d + 2 * h];
    }

    fn w1_view(&self) -> ArrayView2<'_, f64> {
        ArrayView2::from_shape((self.n_hidden, self.n_in), &self.w1).expect("shape")
    }

    /// Output logits for a batch.
    fn logits(&self, x: ArrayView2<f64>) -> (Array2<f64>, Array1<f64>) {
        let mut z1 = x.dot(&self.w1_view().t());
        z1 += &ArrayView2::from_shape((1, self.n_hidden), &self.b1).expect("shape");
        let h = z1.mapv(|v| v.max(0.0));
        let out = h.dot(&Array1::from(self.w2.clone())) + self.b2;
        (h, out)
    }

    /// Batch objective and its gradient in [`Mlp::params`] layout.
    pub fn loss_and_grad(&self, x: ArrayView2<f64>, y: &[u8], alpha: f64) -> (f64, Vec<f64>) {
        let n = x.nrows() as f64;
        let (h, z2) = self.logits(x);
        let mut loss = 0.0;
        let mut dz2 = Array1::zeros(z2.len());
        for (k, &z) in z2.iter().enumerate() {
            let t = y[k] as f64;
            loss += softplus(z) - t * z;
            dz2[k] = (sigmoid(z) - t) / n;
        }
        let wsq: f64 = self.w1.iter().chain(&self.w2).map(|w| w * w).sum();
        loss = loss / n + 0.5 * alpha * wsq / n;

        let gw2 = h.t().dot(&dz2);
        let gb2 = dz2.sum();
        let mut dh = Array2::zeros(h.raw_dim());
        for ((r, c), v) in dh.indexed_iter_mut() {
            if h[[r, c]] > 0.0 {
                *v = dz2[r] * self.w2[c];
            }
        }
        let gw1 = dh.t().dot(&x);
        let gb1 = dh.sum_axis(Axis(0));

        let mut g = Vec::with_capacity(self.n_params());
        g.extend(gw1.iter().zip(&self.w1).map(|(gv, w)| gv + alpha * w / n));
        g.extend(gb1.iter());
        g.extend(gw2.iter().zip(&self.w2).map(|(gv, w)| gv + alpha * w / n));
        g.push(gb2);
        (loss, g)
    }

    pub fn score(&self, row: &[f64]) -> f64 {
        let d = self.n_in;
        let mut z = self.b2;
        for (k, w) in self.w1.chunks_exact(d).enumerate() {
            let a: f64 = w.iter().zip(row).map(|(u, v)| u * v).sum::<f64>() + self.b1[k];
            if a > 0.0 {
                z += a * self.w2[k];
            }
        }
        sigmoid(z)
    }

    fn accuracy(&self, x: ArrayView2<f64>, y: &[u8]) -> f64 {
        let (_, z) = self.logits(x);
        let ok = z.iter().zip(y).filter(|(&z, &t)| (z >= 0.0) as u8 == t).count();
        ok as f64 / y.len() as f64
    }

    /// Trains with Adam; early stopping holds out whole groups.
    pub fn fit(
        x: ArrayView2<f64>,
        y: &[u8],
        groups: &[usize],
        p: &MlpParams,
        seed: u64,
    ) -> Result<Self> {
        let n = y.len();
        if n < 2 || p.hidden == 0 || p.batch_size == 0 || !(p.learning_rate > 0.0) {
            return Err(Error::Training("bad mlp input".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut net = Mlp::init(x.ncols(), p.hidden, &mut rng);

        let (train_rows, val_rows) = if p.early_stopping {
            holdout_groups(y, groups, p.validation_fraction, &mut rng)
        } else {
            ((0..n).collect(), Vec::new())
        };
        if train_rows.is_empty() {
            return Err(Error::Training("no rows left for training".into()));
        }
        let xv = x.select(Axis(0), &val_rows);
        let yv: Vec<u8> = val_rows.iter().map(|&i| y[i]).collect();

        let np = net.n_params();
        let (b1, b2, eps): (f64, f64, f64) = (0.9, 0.999, 1e-8);
        let (mut m, mut v) = (vec![0.0; np], vec![0.0; np]);
        let mut t = 0i32;
        let mut best_score = f64::NEG_INFINITY;
        let mut best_loss = f64::INFINITY;
        let mut best_params = net.params();
        let mut stall = 0;
        let mut order = train_rows.clone();
        let bs = p.batch_size.min(order.len());
        for _epoch in 0..p.max_iter {
            order.shuffle(&mut rng);
            let mut epoch_loss = 0.0;
            for batch in order.chunks(bs) {
                let xb = x.select(Axis(0), batch);
                let yb: Vec<u8> = batch.iter().map(|&i| y[i]).collect();
                let (loss, g) = net.loss_and_grad(xb.view(), &yb, p.alpha);
                epoch_loss += loss * batch.len() as f64;
                t += 1;
                let lr = p.learning_rate * (1.0 - b2.powi(t)).sqrt() / (1.0 - b1.powi(t));
                let mut w = net.params();
                for k in 0..np {
                    m[k] = b1 * m[k] + (1.0 - b1) * g[k];
                    v[k] = b2 * v[k] + (1.0 - b2) * g[k] * g[k];
                    w[k] -= lr * m[k] / (v[k].sqrt() + eps);
                }
                net.set_params(&w);
            }
            net.epochs += 1;
            let loss = epoch_loss / order.len() as f64;
            if !loss.is_finite() {
                return Err(Error::Training(format!("mlp loss diverged at epoch {}", net.epochs)));
            }
            net.loss_curve.push(loss);
            if p.early_stopping && !yv.is_empty() {
                let score = net.accuracy(xv.view(), &yv);
                net.validation_scores.push(score);
                if score < best_score + p.tol {
                    stall += 1;
                } else {
                    stall = 0;
                }
                if score > best_score {
                    best_score = score;
                    best_params = net.params();
                }
            } else {
                if loss > best_loss - p.tol {
                    stall += 1;
                } else {
                    stall = 0;
                }
                best_loss = best_loss.min(loss);
            }
            if stall > p.n_iter_no_change {
                net.converged = true;
                break;
            }
        }
        if !net.converged {
            log::warn!("mlp stopped at the iteration cap ({}) before converging", p.max_iter);
        }
        if p.early_stopping && !yv.is_empty() {
            net.set_params(&best_params);
        }
        Ok(net)
    }
}

/// Splits rows into (train, validation) by whole groups, drawing the
/// validation share separately from crash and non-crash groups.
fn holdout_groups(
    y: &[u8],
    groups: &[usize],
    fraction: f64,
    rng: &mut ChaCha8Rng,
) -> (Vec<usize>, Vec<usize>) {
    let mut crash = std::collections::BTreeMap::<usize, bool>::new();
    for (&g, &t) in groups.iter().zip(y) {
        *crash.entry(g).or_default() |= t == 1;
    }
    let mut held = std::collections::BTreeSet::new();
    for class in [false, true] {
        let mut ids: Vec<usize> = crash.iter().filter(|(_, &c)| c == class).map(|(&g, _)| g).collect();
        if ids.len() < 2 {
            continue;
        }
        ids.shuffle(rng);
        let k = ((ids.len() as f64 * fraction).ceil() as usize).clamp(1, ids.len() - 1);
        held.extend(ids.into_iter().take(k));
    }
    (0..y.len()).partition(|&i| !held.contains(&groups[i]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_score_matches_batch_logits() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let net = Mlp::init(4, 6, &mut rng);
        let x = Array2::from_shape_fn((5, 4), |(i, j)| (i as f64 - 2.0) * 0.7 + j as f64 * 0.3);
        let (_, z) = net.logits(x.view());
        for (i, row) in x.rows().into_iter().enumerate() {
            assert!((net.score(row.as_slice().unwrap()) - sigmoid(z[i])).abs() < 1e-12);
        }
    }

    #[test]
    fn params_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut net = Mlp::init(3, 5, &mut rng);
        let p: Vec<f64> = (0..net.n_params()).map(|k| k as f64).collect();
        net.set_params(&p);
        assert_eq!(net.params(), p);
    }

    #[test]
    fn holdout_keeps_groups_whole() {
        let y: Vec<u8> = (0..100).map(|i| ((i / 10) % 2) as u8).collect();
        let groups: Vec<usize> = (0..100).map(|i| i / 10).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (tr, va) = holdout_groups(&y, &groups, 0.1, &mut rng);
        assert_eq!(va.len(), 20);
        assert_eq!(tr.len() + va.len(), 100);
        for &v in &va {
            assert!(tr.iter().all(|&t| groups[t] != groups[v]));
        }
    }
}
