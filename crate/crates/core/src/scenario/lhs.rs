use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Named interval a scenario parameter is drawn from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamRange {
    pub name: String,
    pub low: f64,
    pub high: f64,
}

impl ParamRange {
    pub fn new(name: &str, low: f64, high: f64) -> Self {
        Self {
            name: name.to_string(),
            low,
            high,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.low.is_finite() && self.high.is_finite()) || self.low > self.high {
            return Err(Error::validation(format!(
                "range `{}` [{}, {}] is invalid",
                self.name, self.low, self.high
            )));
        }
        Ok(())
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.low && v <= self.high
    }

    /// Stratum index of `v` when the range is cut into `n` equal parts.
    pub fn stratum(&self, v: f64, n: usize) -> usize {
        if self.high == self.low {
            return 0;
        }
        let k = ((v - self.low) / (self.high - self.low) * n as f64).floor();
        (k.max(0.0) as usize).min(n - 1)
    }
}

/// Latin hypercube sample: `n` rows, one column per range.
///
/// Every column hits each of its `n` equal-width strata exactly once; within a
/// stratum the value is uniform. A degenerate range yields its single value.
pub fn lhs_sample(ranges: &[ParamRange], n: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    if n == 0 {
        return Err(Error::validation("LHS needs at least one sample"));
    }
    if ranges.is_empty() {
        return Err(Error::validation("LHS needs at least one range"));
    }
    for r in ranges {
        r.validate()?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = vec![vec![0.0; ranges.len()]; n];
    let mut strata: Vec<usize> = (0..n).collect();
    for (j, r) in ranges.iter().enumerate() {
        strata.shuffle(&mut rng);
        let width = r.high - r.low;
        for (row, &k) in rows.iter_mut().zip(&strata) {
            let u: f64 = rng.random();
            let v = r.low + width * (k as f64 + u) / n as f64;
            // keep rounding from pushing a value over the upper stratum edge
            let upper = r.low + width * (k + 1) as f64 / n as f64;
            row[j] = if width == 0.0 { r.low } else { v.min(upper - width * 1e-12) };
        }
    }
    Ok(rows)
}
