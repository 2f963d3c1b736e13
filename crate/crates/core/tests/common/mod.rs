#![allow(dead_code)]

use motocrash::scenario::SetId;
use motocrash::telemetry::{FrameRecord, Samples, SignalDataset, Stream, N_CHANNELS};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn samples(points: &[(Vec<f64>, u8)]) -> Samples {
    let d = points[0].0.len();
    let x = Array2::from_shape_fn((points.len(), d), |(i, j)| points[i].0[j]);
    Samples {
        x,
        y: points.iter().map(|p| p.1).collect(),
        groups: (0..points.len()).map(|i| i % 10).collect(),
    }
}

/// XOR quadrants on [-1, 1]^2, keeping a margin around the axes.
pub fn xor(n: usize, seed: u64) -> Samples {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pts = Vec::with_capacity(n);
    while pts.len() < n {
        let a: f64 = rng.random_range(-1.0..1.0);
        let b: f64 = rng.random_range(-1.0..1.0);
        if a.abs() < 0.1 || b.abs() < 0.1 {
            continue;
        }
        pts.push((vec![a, b], ((a > 0.0) != (b > 0.0)) as u8));
    }
    samples(&pts)
}

/// Two separated blobs: class 1 has x0 in [2, 3], class 0 in [0, 1].
pub fn separable(n: usize, seed: u64) -> Samples {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pts: Vec<_> = (0..n)
        .map(|i| {
            let c = (i % 2) as u8;
            let a = rng.random_range(0.0..1.0) + 2.0 * c as f64;
            let b = rng.random_range(-1.0..1.0);
            (vec![a, b], c)
        })
        .collect();
    samples(&pts)
}

pub fn accuracy(pred: &[f64], y: &[u8]) -> f64 {
    let ok = pred.iter().zip(y).filter(|(&p, &t)| (p >= 0.5) as u8 == t).count();
    ok as f64 / y.len() as f64
}

/// Scenario-structured toy corpus over the full channel layout. Crash streams
/// carry a step in channel 0 after `contact`; `signal` scales the jump.
pub fn toy_dataset(n_crash: usize, n_control: usize, frames: usize, signal: f64, seed: u64) -> SignalDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut streams = Vec::new();
    for s in 0..n_crash + n_control {
        let crash = s < n_crash;
        let contact = frames / 2;
        let frames = (0..frames)
            .map(|k| {
                let mut f = [0.0; N_CHANNELS];
                for v in f.iter_mut() {
                    *v = rng.random_range(-1.0..1.0);
                }
                let label = (crash && k >= contact) as u8;
                if label == 1 {
                    f[0] += signal;
                    f[1] += signal * 0.5;
                }
                FrameRecord {
                    time: k as f64 * 5e-4,
                    features: f,
                    label,
                }
            })
            .collect();
        streams.push(Stream {
            scenario_id: format!("{}-{s:03}", if crash { "crash" } else { "ctrl" }),
            set: if crash { SetId::B1 } else { SetId::A1 },
            category: None,
            frames,
        });
    }
    SignalDataset { streams }
}
