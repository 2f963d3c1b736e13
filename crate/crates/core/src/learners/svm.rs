//! Soft-margin RBF support vector machine trained by SMO with second-order
//! working-set selection, plus Platt sigmoid calibration.

use std::collections::{HashMap, VecDeque};

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const TAU: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvmParams {
    pub c: f64,
    /// RBF width; `None` means 1 / n_features.
    pub gamma: Option<f64>,
    pub tol: f64,
    pub max_iter: usize,
    pub cache_mb: usize,
}

impl Default for SvmParams {
    fn default() -> Self {
        Self {
            c: 1.0,
            gamma: None,
            tol: 1e-3,
            max_iter: 10_000_000,
            cache_mb: 256,
        }
    }
}

/// Dual solution on the training rows.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoSolution {
    pub alpha: Vec<f64>,
    pub rho: f64,
    pub gamma: f64,
    pub iterations: usize,
    /// Training decision values.
    pub decision: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Svm {
    pub gamma: f64,
    pub rho: f64,
    pub n_features: usize,
    /// Support vectors, row-major.
    pub support: Vec<f64>,
    /// `alpha_i * y_i` per support vector.
    pub coef: Vec<f64>,
    pub platt_a: f64,
    pub platt_b: f64,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum()
}

struct KernelCache<'a> {
    x: ArrayView2<'a, f64>,
    gamma: f64,
    rows: HashMap<usize, Vec<f64>>,
    order: VecDeque<usize>,
    capacity: usize,
}

impl KernelCache<'_> {
    fn row(&mut self, i: usize) -> &[f64] {
        if !self.rows.contains_key(&i) {
            if self.rows.len() >= self.capacity {
                if let Some(old) = self.order.pop_front() {
                    self.rows.remove(&old);
                }
            }
            let xi = self.x.row(i);
            let xi = xi.as_slice().expect("contiguous");
            let k: Vec<f64> = self
                .x
                .rows()
                .into_iter()
                .map(|r| (-self.gamma * sq_dist(xi, r.as_slice().expect("contiguous"))).exp())
                .collect();
            self.rows.insert(i, k);
            self.order.push_back(i);
        }
        &self.rows[&i]
    }
}

/// Solves the C-SVC dual for labels in {0, 1}.
pub fn smo_solve(x: ArrayView2<f64>, y: &[u8], p: &SvmParams) -> Result<SmoSolution> {
    let n = y.len();
    if n < 2 || x.nrows() != n {
        return Err(Error::Training("svm needs at least two samples".into()));
    }
    if !(p.c > 0.0) || !(p.tol > 0.0) {
        return Err(Error::Training("svm C and tol must be positive".into()));
    }
    let gamma = p.gamma.unwrap_or(1.0 / x.ncols() as f64);
    let x = x.as_standard_layout();
    let x = x.view();
    let ys: Vec<f64> = y.iter().map(|&v| if v == 1 { 1.0 } else { -1.0 }).collect();
    let c = p.c;
    let mut cache = KernelCache {
        x,
        gamma,
        rows: HashMap::new(),
        order: VecDeque::new(),
        capacity: (p.cache_mb * 1024 * 1024 / (8 * n)).max(2),
    };
    let mut a = vec![0.0; n];
    let mut g = vec![-1.0; n];
    let upper = |a: f64| a >= c;
    let lower = |a: f64| a <= 0.0;
    let mut iter = 0;
    loop {
        // first index: maximal violating from I_up
        let mut gmax = f64::NEG_INFINITY;
        let mut i = usize::MAX;
        for t in 0..n {
            let v = if ys[t] > 0.0 {
                (!upper(a[t])).then(|| -g[t])
            } else {
                (!lower(a[t])).then_some(g[t])
            };
            if let Some(v) = v {
                if v >= gmax {
                    gmax = v;
                    i = t;
                }
            }
        }
        if i == usize::MAX {
            break;
        }
        let ki = cache.row(i).to_vec();
        let mut gmax2 = f64::NEG_INFINITY;
        let mut obj_min = f64::INFINITY;
        let mut j = usize::MAX;
        for t in 0..n {
            let (cand, grad_diff) = if ys[t] > 0.0 {
                if lower(a[t]) {
                    continue;
                }
                (g[t], gmax + g[t])
            } else {
                if upper(a[t]) {
                    continue;
                }
                (-g[t], gmax - g[t])
            };
            gmax2 = gmax2.max(cand);
            if grad_diff > 0.0 {
                let quad = (2.0 - 2.0 * ki[t]).max(TAU);
                let obj = -grad_diff * grad_diff / quad;
                if obj <= obj_min {
                    obj_min = obj;
                    j = t;
                }
            }
        }
        if gmax + gmax2 < p.tol || j == usize::MAX {
            break;
        }
        iter += 1;
        if iter > p.max_iter {
            return Err(Error::Training(format!(
                "smo did not converge in {} iterations (gap {:.3e})",
                p.max_iter,
                gmax + gmax2
            )));
        }
        let kj = cache.row(j).to_vec();
        let qij = ys[i] * ys[j] * ki[j];
        let (old_ai, old_aj) = (a[i], a[j]);
        let (mut ai, mut aj) = (old_ai, old_aj);
        if ys[i] != ys[j] {
            let quad = (2.0 + 2.0 * qij).max(TAU);
            let delta = (-g[i] - g[j]) / quad;
            let diff = ai - aj;
            ai += delta;
            aj += delta;
            if diff > 0.0 {
                if aj < 0.0 {
                    aj = 0.0;
                    ai = diff;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = -diff;
            }
            if diff > 0.0 {
                if ai > c {
                    ai = c;
                    aj = c - diff;
                }
            } else if aj > c {
                aj = c;
                ai = c + diff;
            }
        } else {
            let quad = (2.0 - 2.0 * qij).max(TAU);
            let delta = (g[i] - g[j]) / quad;
            let sum = ai + aj;
            ai -= delta;
            aj += delta;
            if sum > c {
                if ai > c {
                    ai = c;
                    aj = sum - c;
                }
            } else if aj < 0.0 {
                aj = 0.0;
                ai = sum;
            }
            if sum > c {
                if aj > c {
                    aj = c;
                    ai = sum - c;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = sum;
            }
        }
        a[i] = ai;
        a[j] = aj;
        let (dai, daj) = (ai - old_ai, aj - old_aj);
        for t in 0..n {
            g[t] += ys[t] * (ys[i] * ki[t] * dai + ys[j] * kj[t] * daj);
        }
    }

    // offset
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut n_free, mut sum_free) = (0usize, 0.0);
    for t in 0..n {
        let yg = ys[t] * g[t];
        if upper(a[t]) {
            if ys[t] < 0.0 {
                ub = ub.min(yg)
            } else {
                lb = lb.max(yg)
            }
        } else if lower(a[t]) {
            if ys[t] > 0.0 {
                ub = ub.min(yg)
            } else {
                lb = lb.max(yg)
            }
        } else {
            n_free += 1;
            sum_free += yg;
        }
    }
    let rho = if n_free > 0 {
        sum_free / n_free as f64
    } else {
        (ub + lb) / 2.0
    };
    let decision = (0..n).map(|t| ys[t] * (g[t] + 1.0) - rho).collect();
    Ok(SmoSolution {
        alpha: a,
        rho,
        gamma,
        iterations: iter,
        decision,
    })
}

/// Fits `P(crash | f) = 1 / (1 + exp(A f + B))` by regularized Newton descent.
pub fn platt_fit(dec: &[f64], y: &[u8]) -> (f64, f64) {
    let prior1 = y.iter().filter(|&&v| v == 1).count() as f64;
    let prior0 = y.len() as f64 - prior1;
    let hi = (prior1 + 1.0) / (prior1 + 2.0);
    let lo = 1.0 / (prior0 + 2.0);
    let t: Vec<f64> = y.iter().map(|&v| if v == 1 { hi } else { lo }).collect();
    let objective = |a: f64, b: f64| -> f64 {
        dec.iter()
            .zip(&t)
            .map(|(&f, &ti)| {
                let z = f * a + b;
                if z >= 0.0 {
                    ti * z + (-z).exp().ln_1p()
                } else {
                    (ti - 1.0) * z + z.exp().ln_1p()
                }
            })
            .sum()
    };
    let (mut a, mut b) = (0.0, ((prior0 + 1.0) / (prior1 + 1.0)).ln());
    let mut fval = objective(a, b);
    for _ in 0..100 {
        let (mut h11, mut h22, mut h21, mut g1, mut g2) = (1e-12, 1e-12, 0.0, 0.0, 0.0);
        for (&f, &ti) in dec.iter().zip(&t) {
            let z = f * a + b;
            let (p, q) = if z >= 0.0 {
                let e = (-z).exp();
                (e / (1.0 + e), 1.0 / (1.0 + e))
            } else {
                let e = z.exp();
                (1.0 / (1.0 + e), e / (1.0 + e))
            };
            let d2 = p * q;
            h11 += f * f * d2;
            h22 += d2;
            h21 += f * d2;
            let d1 = ti - p;
            g1 += f * d1;
            g2 += d1;
        }
        if g1.abs() < 1e-5 && g2.abs() < 1e-5 {
            break;
        }
        let det = h11 * h22 - h21 * h21;
        let da = -(h22 * g1 - h21 * g2) / det;
        let db = -(-h21 * g1 + h11 * g2) / det;
        let gd = g1 * da + g2 * db;
        let mut step = 1.0;
        while step >= 1e-10 {
            let (na, nb) = (a + step * da, b + step * db);
            let nf = objective(na, nb);
            if nf < fval + 1e-4 * step * gd {
                (a, b, fval) = (na, nb, nf);
                break;
            }
            step /= 2.0;
        }
        if step < 1e-10 {
            log::warn!("platt line search failed");
            break;
        }
    }
    (a, b)
}

impl Svm {
    pub fn fit(x: ArrayView2<f64>, y: &[u8], p: &SvmParams) -> Result<Self> {
        let sol = smo_solve(x, y, p)?;
        let (platt_a, platt_b) = platt_fit(&sol.decision, y);
        let mut support = Vec::new();
        let mut coef = Vec::new();
        for (i, &a) in sol.alpha.iter().enumerate() {
            if a > 0.0 {
                support.extend(x.row(i).iter());
                coef.push(if y[i] == 1 { a } else { -a });
            }
        }
        Ok(Self {
            gamma: sol.gamma,
            rho: sol.rho,
            n_features: x.ncols(),
            support,
            coef,
            platt_a,
            platt_b,
        })
    }

    pub fn n_support(&self) -> usize {
        self.coef.len()
    }

    pub fn decision(&self, row: &[f64]) -> f64 {
        let d = self.n_features;
        self.support
            .chunks_exact(d)
            .zip(&self.coef)
            .map(|(sv, &c)| c * (-self.gamma * sq_dist(sv, row)).exp())
            .sum::<f64>()
            - self.rho
    }

    /// Calibrated crash probability.
    pub fn score(&self, row: &[f64]) -> f64 {
        let z = self.decision(row) * self.platt_a + self.platt_b;
        if z >= 0.0 {
            let e = (-z).exp();
            e / (1.0 + e)
        } else {
            1.0 / (1.0 + z.exp())
        }
    }
}
