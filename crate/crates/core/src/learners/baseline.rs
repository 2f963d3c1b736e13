//! Single-channel threshold detector on the fork-travel acceleration.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::telemetry::{Samples, FS_LIN_ACC};
use crate::tuner::f1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Baseline {
    pub channel: usize,
    /// A frame is a crash when `|x[channel]| >= threshold`.
    pub threshold: f64,
    /// Training-set F1 at the chosen threshold.
    pub train_f1: f64,
}

impl Baseline {
    /// Picks the threshold maximizing training F1; ties keep the higher threshold.
    pub fn fit(data: &Samples) -> Result<Self> {
        Self::fit_channel(data, FS_LIN_ACC)
    }

    pub fn fit_channel(data: &Samples, channel: usize) -> Result<Self> {
        if channel >= data.x.ncols() {
            return Err(Error::Training(format!("channel {channel} out of range")));
        }
        let pos = data.positives();
        if pos == 0 || pos == data.len() {
            return Err(Error::Training("baseline needs both classes".into()));
        }
        let mut v: Vec<(f64, u8)> = data
            .x
            .column(channel)
            .iter()
            .zip(&data.y)
            .map(|(a, &y)| (a.abs(), y))
            .collect();
        v.sort_by(|a, b| b.0.total_cmp(&a.0));
        let (mut tp, mut fp) = (0usize, 0usize);
        let mut best = (f64::NEG_INFINITY, f64::INFINITY);
        for k in 0..v.len() {
            if v[k].1 == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
            if k + 1 < v.len() && v[k + 1].0 == v[k].0 {
                continue;
            }
            let score = f1(tp, fp, pos - tp);
            if score > best.0 {
                best = (score, v[k].0);
            }
        }
        Ok(Self {
            channel,
            threshold: best.1,
            train_f1: best.0,
        })
    }

    pub fn score(&self, row: &[f64]) -> f64 {
        if row[self.channel].abs() >= self.threshold {
            1.0
        } else {
            0.0
        }
    }
}
