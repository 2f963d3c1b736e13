//! WebAssembly bindings for the static demo page in `www/`.
//!
//! Every export takes and returns plain numbers or typed arrays so the page
//! needs no glue beyond what `wasm-bindgen` generates.

use motocrash::dataprep::resample;
use motocrash::dynamics::{simulate, MotoParams, RoadProfile};
use motocrash::scenario::{build_crash_b1, build_obstacle_a2, build_road_a1, lhs_sample, ObstacleKind, SetId};
use motocrash::telemetry::{record, CHANNELS};
use wasm_bindgen::prelude::*;

fn js_err(e: impl std::fmt::Display) -> JsError {
    JsError::new(&e.to_string())
}

/// Sample spacing of the road profiles (m).
#[wasm_bindgen]
pub fn road_spacing() -> f64 {
    motocrash::dynamics::ROAD_SPACING
}

/// Heights of a sinusoidal road with noise.
#[wasm_bindgen]
pub fn road_sine(amplitude: f64, phase_deg: f64, noise: f64, seed: u32) -> Result<Vec<f64>, JsError> {
    let road = build_road_a1(amplitude, phase_deg, noise, seed as u64).map_err(js_err)?;
    Ok(road.heights().to_vec())
}

/// Obstacle names accepted by [`road_obstacle`].
#[wasm_bindgen]
pub fn obstacle_kinds() -> Vec<String> {
    ObstacleKind::ALL.iter().map(|k| k.name().to_string()).collect()
}

/// `[min, max]` obstacle size for `kind` (m).
#[wasm_bindgen]
pub fn obstacle_size_range(kind: &str) -> Result<Vec<f64>, JsError> {
    let (lo, hi) = obstacle(kind)?.size_range();
    Ok(vec![lo, hi])
}

fn obstacle(kind: &str) -> Result<ObstacleKind, JsError> {
    ObstacleKind::ALL
        .into_iter()
        .find(|k| k.name() == kind)
        .ok_or_else(|| JsError::new(&format!("unknown obstacle `{kind}`")))
}

/// Heights of a flat road with one obstacle.
#[wasm_bindgen]
pub fn road_obstacle(kind: &str, size: f64) -> Result<Vec<f64>, JsError> {
    let road: RoadProfile = build_obstacle_a2(obstacle(kind)?, size).map_err(js_err)?;
    Ok(road.heights().to_vec())
}

fn set(name: &str) -> Result<SetId, JsError> {
    SetId::ALL
        .into_iter()
        .find(|s| s.name() == name)
        .ok_or_else(|| JsError::new(&format!("unknown set `{name}`")))
}

/// Parameter names of a set's sampling ranges.
#[wasm_bindgen]
pub fn lhs_dimensions(set_name: &str) -> Result<Vec<String>, JsError> {
    Ok(set(set_name)?.ranges().iter().map(|r| r.name.to_string()).collect())
}

/// Latin hypercube design for `set_name`, row-major `n × d`, each value mapped
/// to `[0, 1]` within its range so strata are the grid cells `k/n`.
#[wasm_bindgen]
pub fn lhs_design(set_name: &str, n: u32, seed: u32) -> Result<Vec<f64>, JsError> {
    let ranges = set(set_name)?.ranges();
    let rows = lhs_sample(&ranges, n as usize, seed as u64).map_err(js_err)?;
    Ok(rows
        .iter()
        .flat_map(|row| {
            row.iter()
                .zip(&ranges)
                .map(|(v, r)| if r.high > r.low { (v - r.low) / (r.high - r.low) } else { 0.5 })
        })
        .collect())
}

/// Signals of one simulated ramp crash, resampled for plotting.
#[wasm_bindgen]
pub struct CrashTraces {
    times: Vec<f64>,
    values: Vec<Vec<f64>>,
    labels: Vec<u8>,
    contact_time: Option<f64>,
}

#[wasm_bindgen]
impl CrashTraces {
    pub fn times(&self) -> Vec<f64> {
        self.times.clone()
    }

    pub fn channel(&self, i: usize) -> Vec<f64> {
        self.values.get(i).cloned().unwrap_or_default()
    }

    pub fn labels(&self) -> Vec<u8> {
        self.labels.clone()
    }

    /// First labelled frame time (s), or NaN when the car was missed.
    pub fn contact_time(&self) -> f64 {
        self.contact_time.unwrap_or(f64::NAN)
    }
}

/// Names and units of the recorded channels, as `name [unit]`.
#[wasm_bindgen]
pub fn channel_labels() -> Vec<String> {
    CHANNELS.iter().map(|(n, u)| format!("{n} [{u}]")).collect()
}

/// Simulates a motorcycle hitting a crossing car: approach `speed` (m/s),
/// car heading `alpha_deg`, lateral `offset` (m). Output is sampled at `rate` Hz.
#[wasm_bindgen]
pub fn crash_traces(speed: f64, alpha_deg: f64, offset: f64, rate: f64) -> Result<CrashTraces, JsError> {
    let spec = build_crash_b1(speed, alpha_deg, offset).map_err(js_err)?;
    let traj = simulate(&spec, &MotoParams::default()).map_err(js_err)?;
    let stream = resample(&record(&traj, None).map_err(js_err)?, rate).map_err(js_err)?;
    let contact_time = stream.contact_index().map(|i| stream.frames[i].time);
    Ok(CrashTraces {
        times: stream.frames.iter().map(|f| f.time).collect(),
        values: (0..CHANNELS.len())
            .map(|c| stream.frames.iter().map(|f| f.features[c]).collect())
            .collect(),
        labels: stream.frames.iter().map(|f| f.label).collect(),
        contact_time,
    })
}
