//! Glue from scenario lists to training-ready datasets.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::dataprep::{resample_2khz, split_by_simulation, subsample_noncrash, DatasetSplit};
use crate::dynamics::{simulate, MotoParams};
use crate::error::Result;
use crate::scenario::{build_set, ScenarioSpec, SetId};
use crate::telemetry::{record, SignalDataset, Stream};

/// Default per-set sizes (345 scenarios).
pub fn default_sizes() -> BTreeMap<SetId, usize> {
    SetId::ALL.iter().map(|&s| (s, s.default_size())).collect()
}

/// Scenario specs of every set, in set order; empty sets are skipped.
pub fn build_corpus(sizes: &BTreeMap<SetId, usize>, seed: u64) -> Result<Vec<ScenarioSpec>> {
    let mut out = Vec::new();
    for (&set, &n) in sizes.iter().filter(|(_, &n)| n > 0) {
        out.extend(build_set(set, n, seed)?);
    }
    Ok(out)
}

/// Simulates one scenario and returns its 2 kHz telemetry.
pub fn simulate_stream(spec: &ScenarioSpec, params: &MotoParams) -> Result<Stream> {
    let run = || -> Result<Stream> {
        let traj = simulate(spec, params)?;
        resample_2khz(&record(&traj, spec.category())?)
    };
    run().map_err(|e| e.in_scenario(&spec.id))
}

/// Simulates scenarios in parallel; output order follows `specs`.
pub fn simulate_all(specs: &[ScenarioSpec], params: &MotoParams) -> Result<SignalDataset> {
    let streams = specs
        .par_iter()
        .map(|s| simulate_stream(s, params))
        .collect::<Result<Vec<_>>>()?;
    Ok(SignalDataset { streams })
}

/// Split corpus plus the derived training views.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub split: DatasetSplit,
    /// Training half after non-crash subsampling.
    pub train: SignalDataset,
    /// Full-rate control streams of the training half, for activation calibration.
    pub controls: SignalDataset,
}

pub fn prepare(ds: &SignalDataset, split_seed: u64, subsample_rate: usize) -> Result<Prepared> {
    let split = split_by_simulation(ds, split_seed)?;
    split.validate()?;
    let train = subsample_noncrash(&split.train, subsample_rate)?;
    let controls = SignalDataset {
        streams: split.train.streams.iter().filter(|s| !s.is_crash()).cloned().collect(),
    };
    Ok(Prepared {
        split,
        train,
        controls,
    })
}
