//! The 23 recorded signals, the latching crash label, and the dataset CSV format.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::dynamics::{
    Trajectory, DEFLECTION, FORK, FRONT_SPIN, PITCH, REAR_SPIN, SWING, X, Z,
};
use crate::error::{Error, Result};
use crate::scenario::{DelayCategory, SetId};

pub const N_CHANNELS: usize = 23;

/// Channel abbreviations in recording order, with units.
pub const CHANNELS: [(&str, &str); N_CHANNELS] = [
    ("body_lin_vel_x", "m/s"),
    ("body_lin_acc_x", "m/s^2"),
    ("body_ang_vel_y", "rad/s"),
    ("body_ang_acc_y", "rad/s^2"),
    ("fw_ang_vel", "rad/s"),
    ("fw_ang_acc", "rad/s^2"),
    ("rw_ang_vel", "rad/s"),
    ("rw_ang_acc", "rad/s^2"),
    ("rs_ang_pos", "rad"),
    ("rs_ang_vel", "rad/s"),
    ("rs_ang_acc", "rad/s^2"),
    ("fs_lin_pos", "m"),
    ("fs_lin_vel", "m/s"),
    ("fs_lin_acc", "m/s^2"),
    ("fd_ang_pos", "rad"),
    ("fd_ang_vel", "rad/s"),
    ("fd_ang_acc", "rad/s^2"),
    ("fw_cnt_force", "N"),
    ("rw_cnt_force", "N"),
    ("fw_rw_vel_diff", "rad/s"),
    ("fw_rw_acc_diff", "rad/s^2"),
    ("cnt_sensor_left", "-"),
    ("cnt_sensor_right", "-"),
];

pub const FS_LIN_ACC: usize = 13;
pub const FW_CNT_FORCE: usize = 17;
pub const RW_CNT_FORCE: usize = 18;
pub const SENSOR_LEFT: usize = 21;
pub const SENSOR_RIGHT: usize = 22;

pub fn channel_names() -> impl Iterator<Item = &'static str> {
    CHANNELS.iter().map(|c| c.0)
}

/// One time step of one scenario.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub time: f64,
    pub features: [f64; N_CHANNELS],
    pub label: u8,
}

/// All frames of one scenario in time order.
#[derive(Debug, Clone, PartialEq)]
pub struct Stream {
    pub scenario_id: String,
    pub set: SetId,
    pub category: Option<DelayCategory>,
    pub frames: Vec<FrameRecord>,
}

impl Stream {
    /// Index of the first crash-labelled frame.
    pub fn contact_index(&self) -> Option<usize> {
        self.frames.iter().position(|f| f.label == 1)
    }

    pub fn is_crash(&self) -> bool {
        self.set.is_crash()
    }

    /// Label transitions 0→1 or 1→0.
    pub fn transitions(&self) -> usize {
        self.frames.windows(2).filter(|w| w[0].label != w[1].label).count()
    }
}

/// Frames grouped by scenario.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SignalDataset {
    pub streams: Vec<Stream>,
}

/// Flat feature matrix with labels and the scenario index of every row.
#[derive(Debug, Clone, PartialEq)]
pub struct Samples {
    pub x: Array2<f64>,
    pub y: Vec<u8>,
    pub groups: Vec<usize>,
}

impl Samples {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    /// Rows whose group satisfies `keep`.
    pub fn select_groups(&self, keep: impl Fn(usize) -> bool) -> Samples {
        let rows: Vec<usize> = (0..self.len()).filter(|&i| keep(self.groups[i])).collect();
        self.select_rows(&rows)
    }

    pub fn select_rows(&self, rows: &[usize]) -> Samples {
        Samples {
            x: self.x.select(ndarray::Axis(0), rows),
            y: rows.iter().map(|&i| self.y[i]).collect(),
            groups: rows.iter().map(|&i| self.groups[i]).collect(),
        }
    }

    pub fn positives(&self) -> usize {
        self.y.iter().filter(|&&v| v == 1).count()
    }
}

impl SignalDataset {
    pub fn n_frames(&self) -> usize {
        self.streams.iter().map(|s| s.frames.len()).sum()
    }

    /// (non-crash, crash) frame counts.
    pub fn class_counts(&self) -> (usize, usize) {
        let crash = self
            .streams
            .iter()
            .flat_map(|s| &s.frames)
            .filter(|f| f.label == 1)
            .count();
        (self.n_frames() - crash, crash)
    }

    pub fn find(&self, id: &str) -> Option<&Stream> {
        self.streams.iter().find(|s| s.scenario_id == id)
    }

    /// Flattens all frames; `groups` indexes into `streams`.
    pub fn to_samples(&self) -> Samples {
        let n = self.n_frames();
        let mut x = Array2::zeros((n, N_CHANNELS));
        let mut y = Vec::with_capacity(n);
        let mut groups = Vec::with_capacity(n);
        let mut row = 0;
        for (g, s) in self.streams.iter().enumerate() {
            for f in &s.frames {
                x.row_mut(row).assign(&ndarray::ArrayView1::from(&f.features));
                y.push(f.label);
                groups.push(g);
                row += 1;
            }
        }
        Samples { x, y, groups }
    }
}

/// Per-frame tire force: road contact plus car contact on the same wheel (N).
pub fn residual_wheel_force(traj: &Trajectory) -> Vec<[f64; 2]> {
    traj.samples
        .iter()
        .map(|s| {
            [
                s.loads.road_normal[0] + s.loads.car_on_wheel[0],
                s.loads.road_normal[1] + s.loads.car_on_wheel[1],
            ]
        })
        .collect()
}

/// 0 before the first motorcycle-car contact, 1 from it onwards.
pub fn label(traj: &Trajectory) -> Vec<u8> {
    let first = traj.first_car_contact();
    traj.samples
        .iter()
        .map(|s| u8::from(first.is_some_and(|t| s.time >= t)))
        .collect()
}

/// The 23 channels at every recorded sample of `traj`.
///
/// Body channels are expressed in the pitched frame: linear quantities along its
/// forward axis, angular ones about its lateral axis. Accelerations come from the
/// integrator, not from differencing.
pub fn extract_channels(traj: &Trajectory) -> Result<Vec<FrameRecord>> {
    if traj.samples.is_empty() {
        return Err(Error::schema(format!(
            "trajectory `{}` has no samples",
            traj.scenario_id
        )));
    }
    let forces = residual_wheel_force(traj);
    let labels = label(traj);
    Ok(traj
        .samples
        .iter()
        .zip(forces)
        .zip(labels)
        .map(|((s, force), label)| {
            let (sin, cos) = s.q[PITCH].sin_cos();
            let along = |v: &[f64; 8]| v[X] * cos + v[Z] * sin;
            let features = [
                along(&s.qd),
                along(&s.qdd),
                s.qd[PITCH],
                s.qdd[PITCH],
                s.qd[FRONT_SPIN],
                s.qdd[FRONT_SPIN],
                s.qd[REAR_SPIN],
                s.qdd[REAR_SPIN],
                s.q[SWING],
                s.qd[SWING],
                s.qdd[SWING],
                s.q[FORK],
                s.qd[FORK],
                s.qdd[FORK],
                s.q[DEFLECTION],
                s.qd[DEFLECTION],
                s.qdd[DEFLECTION],
                force[0],
                force[1],
                s.qd[FRONT_SPIN] - s.qd[REAR_SPIN],
                s.qdd[FRONT_SPIN] - s.qdd[REAR_SPIN],
                f64::from(u8::from(s.loads.sensor_left)),
                f64::from(u8::from(s.loads.sensor_right)),
            ];
            FrameRecord {
                time: s.time,
                features,
                label,
            }
        })
        .collect())
}

/// Stream at the simulator's native rate.
pub fn record(traj: &Trajectory, category: Option<DelayCategory>) -> Result<Stream> {
    Ok(Stream {
        scenario_id: traj.scenario_id.clone(),
        set: traj.set,
        category,
        frames: extract_channels(traj)?,
    })
}

const FIXED_COLUMNS: [&str; 4] = ["scenario_id", "set_id", "category", "time"];

/// Writes the dataset as CSV: `scenario_id,set_id,category,time,<23 channels>,label`.
///
/// Floats use the shortest representation that parses back to the same value.
pub fn write_dataset<W: Write>(mut w: W, ds: &SignalDataset) -> Result<()> {
    let header: Vec<&str> = FIXED_COLUMNS
        .iter()
        .copied()
        .chain(channel_names())
        .chain(["label"])
        .collect();
    writeln!(w, "{}", header.join(","))?;
    let mut line = String::new();
    for s in &ds.streams {
        let cat = s.category.map(|c| category_token(c)).unwrap_or_default();
        for f in &s.frames {
            use std::fmt::Write as _;
            line.clear();
            let _ = write!(line, "{},{},{},{}", s.scenario_id, s.set, cat, f.time);
            for v in &f.features {
                let _ = write!(line, ",{v}");
            }
            let _ = write!(line, ",{}", f.label);
            writeln!(w, "{line}")?;
        }
    }
    Ok(())
}

fn category_token(c: DelayCategory) -> &'static str {
    match c {
        DelayCategory::Frontal => "frontal",
        DelayCategory::LateralRear => "lateral-rear",
        DelayCategory::Grazing => "grazing",
    }
}

fn parse_category(s: &str) -> Option<DelayCategory> {
    DelayCategory::ALL.into_iter().find(|&c| category_token(c) == s)
}

/// Reads a dataset CSV. The `category` column is optional.
pub fn read_dataset<R: BufRead>(r: R) -> Result<SignalDataset> {
    let mut lines = r.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse {
            line: 1,
            message: "empty file".into(),
        })??;
    let cols: Vec<&str> = header.trim_end().split(',').collect();
    let pos: HashMap<&str, usize> = cols.iter().enumerate().map(|(i, c)| (*c, i)).collect();
    let need = |name: &str| {
        pos.get(name)
            .copied()
            .ok_or_else(|| Error::schema(format!("missing column `{name}`")))
    };
    let (c_id, c_set, c_time, c_label) = (need("scenario_id")?, need("set_id")?, need("time")?, need("label")?);
    let c_cat = pos.get("category").copied();
    let c_feat: Vec<usize> = channel_names().map(need).collect::<Result<_>>()?;

    let mut ds = SignalDataset::default();
    let mut index: HashMap<String, usize> = HashMap::new();
    for (i, line) in lines.enumerate() {
        let lineno = i + 2;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let err = |message: String| Error::Parse { line: lineno, message };
        let fields: Vec<&str> = line.trim_end().split(',').collect();
        if fields.len() != cols.len() {
            return Err(err(format!("expected {} columns, found {}", cols.len(), fields.len())));
        }
        let num = |c: usize| {
            fields[c]
                .parse::<f64>()
                .map_err(|_| err(format!("`{}` is not a number in column `{}`", fields[c], cols[c])))
        };
        let time = num(c_time)?;
        let mut features = [0.0; N_CHANNELS];
        for (k, &c) in c_feat.iter().enumerate() {
            features[k] = num(c)?;
        }
        let label = match fields[c_label] {
            "0" => 0,
            "1" => 1,
            other => return Err(err(format!("label `{other}` is not 0 or 1"))),
        };
        let id = fields[c_id];
        let g = match index.get(id) {
            Some(&g) => g,
            None => {
                let set: SetId = fields[c_set].parse().map_err(|e: Error| err(e.to_string()))?;
                let category = c_cat.and_then(|c| parse_category(fields[c]));
                ds.streams.push(Stream {
                    scenario_id: id.to_string(),
                    set,
                    category,
                    frames: Vec::new(),
                });
                index.insert(id.to_string(), ds.streams.len() - 1);
                ds.streams.len() - 1
            }
        };
        let frames = &mut ds.streams[g].frames;
        if let Some(prev) = frames.last() {
            if time <= prev.time {
                return Err(err(format!("time {time} does not increase within `{id}`")));
            }
        }
        frames.push(FrameRecord { time, features, label });
    }
    Ok(ds)
}
