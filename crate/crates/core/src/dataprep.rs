//! Splitting, class balancing, standardization and resampling.

use std::collections::BTreeMap;

use ndarray::{Array1, Array2, ArrayView1, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::SetId;
use crate::telemetry::{FrameRecord, SignalDataset, Stream, N_CHANNELS, SENSOR_LEFT, SENSOR_RIGHT};

/// Sample rate the classifiers operate at (Hz).
pub const SAMPLE_RATE: f64 = 2000.0;

const TIME_EPS: f64 = 1e-9;

/// Resamples a stream onto a uniform grid of `rate` Hz starting at its first frame.
///
/// Continuous channels are interpolated linearly. Contact sensors report 1 if
/// they were on at any input frame since the previous output frame, and the
/// label latches once any input frame at or before the output time is a crash.
pub fn resample(stream: &Stream, rate: f64) -> Result<Stream> {
    if !(rate > 0.0) {
        return Err(Error::validation(format!("sample rate {rate} must be positive")));
    }
    let frames = &stream.frames;
    if frames.is_empty() {
        return Ok(stream.clone());
    }
    for (i, w) in frames.windows(2).enumerate() {
        if w[1].time <= w[0].time {
            return Err(Error::Parse {
                line: i + 2,
                message: format!("time does not increase in `{}`", stream.scenario_id),
            });
        }
    }
    let t0 = frames[0].time;
    let span = frames[frames.len() - 1].time - t0;
    let count = (span * rate + TIME_EPS).floor() as usize + 1;
    let first_crash = frames.iter().position(|f| f.label == 1);
    let mut out = Vec::with_capacity(count);
    let mut prev_hi = 0usize;
    for k in 0..count {
        let t = t0 + k as f64 / rate;
        // first input frame strictly after t (with tolerance)
        let hi = frames.partition_point(|f| f.time <= t + TIME_EPS);
        let left = hi.saturating_sub(1);
        let a = &frames[left];
        let mut features = a.features;
        if (a.time - t).abs() > TIME_EPS && hi < frames.len() {
            let b = &frames[hi];
            let w = (t - a.time) / (b.time - a.time);
            for c in 0..N_CHANNELS {
                features[c] = a.features[c] + w * (b.features[c] - a.features[c]);
            }
        }
        for c in [SENSOR_LEFT, SENSOR_RIGHT] {
            let lo = if k == 0 { 0 } else { prev_hi };
            let window = if hi > lo { &frames[lo..hi] } else { &frames[left..=left] };
            let on = window.iter().any(|f| f.features[c] > 0.5);
            features[c] = f64::from(u8::from(on));
        }
        prev_hi = hi;
        let label = u8::from(first_crash.is_some_and(|i| i < hi));
        out.push(FrameRecord {
            time: t,
            features,
            label,
        });
    }
    Ok(Stream {
        frames: out,
        ..stream.clone()
    })
}

/// Resamples to the classifier rate.
pub fn resample_2khz(stream: &Stream) -> Result<Stream> {
    resample(stream, SAMPLE_RATE)
}

/// Scenario-level train/test partition.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSplit {
    pub train: SignalDataset,
    pub test: SignalDataset,
    pub seed: u64,
}

impl DatasetSplit {
    /// Scenario ids per half.
    pub fn ids(&self) -> (Vec<&str>, Vec<&str>) {
        fn ids(d: &SignalDataset) -> Vec<&str> {
            d.streams.iter().map(|s| s.scenario_id.as_str()).collect()
        }
        (ids(&self.train), ids(&self.test))
    }

    /// Checks the partition: disjoint halves and no validation-only set in training.
    pub fn validate(&self) -> Result<()> {
        if let Some(s) = self.train.streams.iter().find(|s| s.set.validation_only()) {
            return Err(Error::validation(format!(
                "validation-only scenario `{}` in the training half",
                s.scenario_id
            )));
        }
        let (train, test) = self.ids();
        let train: std::collections::HashSet<_> = train.into_iter().collect();
        if let Some(id) = test.iter().find(|id| train.contains(*id)) {
            return Err(Error::validation(format!("scenario `{id}` is in both halves")));
        }
        Ok(())
    }
}

/// 50/50 split of whole scenarios, stratified by set; B.3 always goes to test.
///
/// Within each set, scenario order is shuffled with `seed` and the first
/// `⌊n/2⌋` go to training.
pub fn split_by_simulation(ds: &SignalDataset, seed: u64) -> Result<DatasetSplit> {
    let crash = ds.streams.iter().filter(|s| s.is_crash()).count();
    let safe = ds.streams.len() - crash;
    if crash < 2 || safe < 2 {
        return Err(Error::validation(format!(
            "split needs at least two scenarios per class (crash {crash}, non-crash {safe})"
        )));
    }
    let mut by_set: BTreeMap<SetId, Vec<usize>> = BTreeMap::new();
    for (i, s) in ds.streams.iter().enumerate() {
        by_set.entry(s.set).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train_idx = Vec::new();
    let mut test_idx = Vec::new();
    for (set, mut idx) in by_set {
        if set == SetId::B3 {
            test_idx.extend(idx);
            continue;
        }
        idx.shuffle(&mut rng);
        let half = idx.len() / 2;
        train_idx.extend_from_slice(&idx[..half]);
        test_idx.extend_from_slice(&idx[half..]);
    }
    train_idx.sort_unstable();
    test_idx.sort_unstable();
    let pick = |idx: &[usize]| SignalDataset {
        streams: idx.iter().map(|&i| ds.streams[i].clone()).collect(),
    };
    let split = DatasetSplit {
        train: pick(&train_idx),
        test: pick(&test_idx),
        seed,
    };
    split.validate()?;
    Ok(split)
}

/// Keeps every `rate`-th non-crash frame of each scenario (starting with its
/// first) and all crash frames.
pub fn subsample_noncrash(ds: &SignalDataset, rate: usize) -> Result<SignalDataset> {
    if rate == 0 {
        return Err(Error::validation("subsample rate must be at least 1"));
    }
    Ok(SignalDataset {
        streams: ds
            .streams
            .iter()
            .map(|s| {
                let mut k = 0usize;
                let frames = s
                    .frames
                    .iter()
                    .filter(|f| {
                        if f.label == 1 {
                            return true;
                        }
                        k += 1;
                        (k - 1) % rate == 0
                    })
                    .copied()
                    .collect();
                Stream {
                    frames,
                    ..s.clone()
                }
            })
            .collect(),
    })
}

/// Per-feature affine scaling to zero mean and unit (population) variance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    /// Fits on the rows of `x`.
    pub fn fit(x: &Array2<f64>) -> Result<Self> {
        if x.nrows() == 0 {
            return Err(Error::validation("cannot fit a standardizer on no rows"));
        }
        let mean: Array1<f64> = x.mean_axis(Axis(0)).expect("non-empty");
        let std = x.std_axis(Axis(0), 0.0);
        for (c, &s) in std.iter().enumerate() {
            if s == 0.0 {
                log::warn!("feature {c} is constant; it standardizes to 0");
            }
        }
        Ok(Self {
            mean: mean.to_vec(),
            std: std.to_vec(),
        })
    }

    pub fn n_features(&self) -> usize {
        self.mean.len()
    }

    fn check(&self, n: usize) -> Result<()> {
        if n != self.n_features() {
            return Err(Error::schema(format!(
                "expected {} features, got {n}",
                self.n_features()
            )));
        }
        Ok(())
    }

    /// Standardized copy of `x`.
    pub fn apply(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        self.check(x.ncols())?;
        let mut out = x.clone();
        for mut row in out.rows_mut() {
            for (c, v) in row.iter_mut().enumerate() {
                *v = self.scale(c, *v);
            }
        }
        Ok(out)
    }

    /// Standardizes one frame into `out`.
    pub fn apply_row(&self, row: ArrayView1<f64>, out: &mut [f64]) -> Result<()> {
        self.check(row.len())?;
        for (c, (&v, o)) in row.iter().zip(out.iter_mut()).enumerate() {
            *o = self.scale(c, v);
        }
        Ok(())
    }

    #[inline]
    fn scale(&self, c: usize, v: f64) -> f64 {
        if self.std[c] == 0.0 {
            0.0
        } else {
            (v - self.mean[c]) / self.std[c]
        }
    }
}

/// Fits a standardizer on the training frames.
pub fn fit_standardizer(train: &SignalDataset) -> Result<Standardizer> {
    Standardizer::fit(&train.to_samples().x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn stream(id: &str, set: SetId, times: &[f64], crash_from: Option<usize>) -> Stream {
        Stream {
            scenario_id: id.into(),
            set,
            category: None,
            frames: times
                .iter()
                .enumerate()
                .map(|(i, &t)| {
                    let mut features = [0.0; N_CHANNELS];
                    features[0] = 3.0 * t + 1.0;
                    FrameRecord {
                        time: t,
                        features,
                        label: u8::from(crash_from.is_some_and(|c| i >= c)),
                    }
                })
                .collect(),
        }
    }

    fn grid(n: usize, rate: f64) -> Vec<f64> {
        (0..n).map(|i| i as f64 / rate).collect()
    }

    #[test]
    fn standardizes_small_example() {
        let x = array![[1.0], [2.0], [3.0]];
        let s = Standardizer::fit(&x).unwrap();
        assert_eq!(s.mean, vec![2.0]);
        assert!((s.std[0] - (2.0f64 / 3.0).sqrt()).abs() < 1e-15);
        let t = s.apply(&x).unwrap();
        let expect = 1.0 / (2.0f64 / 3.0).sqrt();
        assert!((t[[0, 0]] + expect).abs() < 1e-12);
        assert_eq!(t[[1, 0]], 0.0);
        assert!((t[[2, 0]] - expect).abs() < 1e-12);
    }

    #[test]
    fn constant_feature_maps_to_zero() {
        let x = array![[5.0, 1.0], [5.0, 2.0]];
        let s = Standardizer::fit(&x).unwrap();
        let t = s.apply(&x).unwrap();
        assert!(t.column(0).iter().all(|&v| v == 0.0));
        assert!(s.apply(&array![[1.0]]).is_err());
    }

    #[test]
    fn subsample_keeps_ceil_and_crash_frames() {
        let s = stream("a", SetId::B1, &grid(150, 2000.0), Some(120));
        let ds = SignalDataset { streams: vec![s] };
        let out = subsample_noncrash(&ds, 12).unwrap();
        assert_eq!(out.class_counts(), (10, 30));
        assert_eq!(subsample_noncrash(&ds, 1).unwrap(), ds);
        let odd = SignalDataset {
            streams: vec![stream("b", SetId::A1, &grid(13, 2000.0), None)],
        };
        assert_eq!(subsample_noncrash(&odd, 12).unwrap().n_frames(), 2);
        assert!(subsample_noncrash(&ds, 0).is_err());
    }

    #[test]
    fn resample_identity_and_count() {
        let s = stream("a", SetId::B1, &grid(11, 2000.0), Some(4));
        assert_eq!(resample_2khz(&s).unwrap(), s);
        // 1 kHz for T = 0.0105 s -> floor(21) + 1 frames
        let s1 = stream("b", SetId::A1, &grid(11, 1000.0), None);
        let r = resample_2khz(&s1).unwrap();
        assert_eq!(r.frames.len(), 21);
    }

    #[test]
    fn resample_interpolates_ramp_midpoints() {
        let s = stream("b", SetId::A1, &grid(6, 1000.0), None);
        let r = resample_2khz(&s).unwrap();
        for f in &r.frames {
            assert!((f.features[0] - (3.0 * f.time + 1.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn resample_latches_label_and_holds_sensors() {
        let mut s = stream("c", SetId::B1, &grid(20, 10_000.0), Some(7));
        s.frames[3].features[SENSOR_LEFT] = 1.0;
        let r = resample_2khz(&s).unwrap();
        let labels: Vec<u8> = r.frames.iter().map(|f| f.label).collect();
        // input contact at 0.7 ms -> first output frame at or after it is 1.0 ms
        assert_eq!(labels, vec![0, 0, 1, 1]);
        let left: Vec<f64> = r.frames.iter().map(|f| f.features[SENSOR_LEFT]).collect();
        assert_eq!(left, vec![0.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn resample_rejects_non_monotone_time() {
        let s = stream("d", SetId::A1, &[0.0, 0.001, 0.001], None);
        assert!(resample_2khz(&s).is_err());
    }

    #[test]
    fn split_is_even_and_keeps_b3_out_of_training() {
        let mut streams = Vec::new();
        for i in 0..10 {
            streams.push(stream(&format!("a{i}"), SetId::A1, &[0.0], None));
        }
        for i in 0..4 {
            streams.push(stream(&format!("b{i}"), SetId::B1, &[0.0], Some(0)));
        }
        for i in 0..3 {
            streams.push(stream(&format!("iso{i}"), SetId::B3, &[0.0], Some(0)));
        }
        let ds = SignalDataset { streams };
        let split = split_by_simulation(&ds, 4).unwrap();
        let count = |d: &SignalDataset, set| d.streams.iter().filter(|s| s.set == set).count();
        assert_eq!(count(&split.train, SetId::A1), 5);
        assert_eq!(count(&split.test, SetId::A1), 5);
        assert_eq!(count(&split.train, SetId::B3), 0);
        assert_eq!(count(&split.test, SetId::B3), 3);
        assert_eq!(split, split_by_simulation(&ds, 4).unwrap());

        let mut bad = split.clone();
        bad.train.streams.push(split.test.streams.last().unwrap().clone());
        assert!(bad.validate().is_err());
    }

    #[test]
    fn split_needs_both_classes() {
        let ds = SignalDataset {
            streams: (0..4)
                .map(|i| stream(&format!("a{i}"), SetId::A1, &[0.0], None))
                .collect(),
        };
        assert!(split_by_simulation(&ds, 0).is_err());
    }
}
