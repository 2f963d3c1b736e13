//! Scenario sets: parameter sampling, road and crash construction, and the
//! mapping from a scenario to a runnable simulation setup.

mod iso;
mod lhs;
mod roads;

pub use iso::{iso_catalog, DelayCategory, IsoConfig};
pub use lhs::{lhs_sample, ParamRange};
pub use roads::{build_obstacle_a2, build_road_a1, ObstacleKind, MAX_GRADIENT, OBSTACLE_X};

use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::dynamics::{
    geometry, static_equilibrium, CarObstacle, Controls, Environment, MotoGeometry, MotoParams,
    MotoPart, RoadProfile, SimSetup, DEFAULT_DT,
};
use crate::error::{Error, Result};

/// Time from the start of a crash scenario to the intended first contact (s).
pub const PRE_CONTACT: f64 = 0.25;
/// Simulated time kept after the first contact (s).
pub const POST_CONTACT: f64 = 0.1;
/// Upper bound on crash scenario length (s).
pub const CRASH_HORIZON: f64 = 1.5;
/// Non-crash riding length on the sinusoidal roads (s).
pub const A1_HORIZON: f64 = 2.0;
/// Overlap the ISO placement pushes the car into the motorcycle (m).
const ENGAGEMENT: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SetId {
    #[serde(rename = "A.1")]
    A1,
    #[serde(rename = "A.2")]
    A2,
    #[serde(rename = "B.1")]
    B1,
    #[serde(rename = "B.2")]
    B2,
    #[serde(rename = "B.3")]
    B3,
}

impl SetId {
    pub const ALL: [SetId; 5] = [SetId::A1, SetId::A2, SetId::B1, SetId::B2, SetId::B3];

    pub fn name(self) -> &'static str {
        match self {
            SetId::A1 => "A.1",
            SetId::A2 => "A.2",
            SetId::B1 => "B.1",
            SetId::B2 => "B.2",
            SetId::B3 => "B.3",
        }
    }

    pub fn is_crash(self) -> bool {
        matches!(self, SetId::B1 | SetId::B2 | SetId::B3)
    }

    /// Sets used only for validation, never for training.
    pub fn validation_only(self) -> bool {
        self == SetId::B3
    }

    /// Default number of scenarios.
    pub fn default_size(self) -> usize {
        match self {
            SetId::A1 | SetId::B1 | SetId::B2 => 100,
            SetId::A2 => 20,
            SetId::B3 => 25,
        }
    }

    /// Sampled parameters and their ranges.
    pub fn ranges(self) -> Vec<ParamRange> {
        match self {
            SetId::A1 => vec![
                ParamRange::new("amplitude", 0.0, 6.0),
                ParamRange::new("phase", 0.0, 360.0),
                ParamRange::new("noise", 0.0, 0.025),
                ParamRange::new("speed", 3.0, 23.0),
                ParamRange::new("torque", -500.0, 500.0),
            ],
            SetId::A2 => vec![ParamRange::new("speed", 3.0, 23.0)],
            SetId::B1 => vec![
                ParamRange::new("speed", 6.7, 13.4),
                ParamRange::new("alpha", 0.0, 360.0),
                ParamRange::new("offset", -1.2, 1.2),
            ],
            SetId::B2 => vec![
                ParamRange::new("car_speed", 6.7, 13.4),
                ParamRange::new("beta", 0.0, 360.0),
                ParamRange::new("gamma", -5.0, 5.0),
            ],
            SetId::B3 => vec![],
        }
    }
}

impl fmt::Display for SetId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for SetId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SetId::ALL
            .into_iter()
            .find(|id| id.name().eq_ignore_ascii_case(s) || id.name().replace('.', "") == s.to_uppercase())
            .ok_or_else(|| Error::validation(format!("unknown scenario set `{s}`")))
    }
}

/// Ground-truth class of a whole scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LabelClass {
    NonCrash,
    Crash,
}

/// One scenario: set, sampled parameters and everything else needed to rebuild
/// its simulation deterministically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub id: String,
    pub set: SetId,
    pub params: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub obstacle: Option<ObstacleKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iso: Option<IsoConfig>,
    /// Seed for stochastic parts of the scenario (road noise).
    pub seed: u64,
}

impl ScenarioSpec {
    pub fn class(&self) -> LabelClass {
        if self.set.is_crash() {
            LabelClass::Crash
        } else {
            LabelClass::NonCrash
        }
    }

    pub fn param(&self, name: &str) -> Result<f64> {
        self.params
            .get(name)
            .copied()
            .ok_or_else(|| Error::validation(format!("scenario `{}` lacks parameter `{name}`", self.id)))
    }

    /// Delay category for crash scenarios with a known impact configuration.
    pub fn category(&self) -> Option<DelayCategory> {
        self.iso.as_ref().map(|c| c.category)
    }

    /// Checks every sampled parameter against its set's range.
    pub fn validate(&self) -> Result<()> {
        let mut ranges = self.set.ranges();
        if let Some(kind) = self.obstacle {
            let (lo, hi) = kind.size_range();
            ranges.push(ParamRange::new("size", lo, hi));
        }
        for r in &ranges {
            let v = self.param(&r.name)?;
            if !(v >= r.low - 1e-9 && v <= r.high + 1e-9) {
                return Err(Error::validation(format!(
                    "scenario `{}`: {} = {v} outside [{}, {}]",
                    self.id, r.name, r.low, r.high
                )));
            }
        }
        match self.set {
            SetId::A2 if self.obstacle.is_none() => {
                Err(Error::validation(format!("scenario `{}` lacks an obstacle", self.id)))
            }
            SetId::B3 if self.iso.is_none() => Err(Error::validation(format!(
                "scenario `{}` lacks an impact configuration",
                self.id
            ))),
            _ => Ok(()),
        }
    }

    /// Simulation setup for this scenario.
    pub fn setup(&self, params: &MotoParams) -> Result<SimSetup> {
        self.validate()?;
        match self.set {
            SetId::A1 => {
                let road = build_road_a1(
                    self.param("amplitude")?,
                    self.param("phase")?,
                    self.param("noise")?,
                    self.seed,
                )?;
                Ok(SimSetup {
                    env: Environment { road, car: None },
                    start_x: -4.0,
                    speed: self.param("speed")?,
                    controls: Controls::from_signed_torque(self.param("torque")?),
                    horizon: A1_HORIZON,
                    post_contact: None,
                    dt: DEFAULT_DT,
                })
            }
            SetId::A2 => {
                let kind = self.obstacle.expect("validated");
                let road = build_obstacle_a2(kind, self.param("size")?)?;
                let speed = self.param("speed")?;
                let start_x = -4.0;
                // long enough for both wheels to clear the obstacle
                let horizon = ((OBSTACLE_X + kind.extent() + 3.0 - start_x) / speed).clamp(1.5, 4.5);
                Ok(SimSetup {
                    env: Environment { road, car: None },
                    start_x,
                    speed,
                    controls: Controls::default(),
                    horizon,
                    post_contact: None,
                    dt: DEFAULT_DT,
                })
            }
            SetId::B1 => {
                let speed = self.param("speed")?;
                let alpha = self.param("alpha")?.to_radians();
                let offset = self.param("offset")?;
                let foot = footprint(params)?;
                let front = part(&foot, MotoPart::FrontWheel).x_max;
                let mut car = CarObstacle::saloon([0.0, offset], alpha);
                let half_x = (car.length / 2.0 * alpha.cos()).abs() + (car.width / 2.0 * alpha.sin()).abs();
                car.position[0] = front + speed * PRE_CONTACT + half_x;
                Ok(crash_setup(car, 0.0, speed))
            }
            SetId::B2 => {
                let v = self.param("car_speed")?;
                let beta = self.param("beta")?.to_radians();
                let gamma = self.param("gamma")?.to_radians();
                let foot = footprint(params)?;
                let front = part(&foot, MotoPart::FrontWheel);
                let rear = part(&foot, MotoPart::RearWheel);
                let centre = [(front.x_max + rear.x_min) / 2.0, 0.0];
                let half_len = (front.x_max - rear.x_min) / 2.0;
                let heading = beta + std::f64::consts::PI + gamma;
                let mut car = CarObstacle::saloon(centre, heading);
                let reach = car.length / 2.0
                    + (half_len * beta.cos()).abs()
                    + (params.handlebar_half_width * beta.sin()).abs();
                let dist = reach + v * PRE_CONTACT;
                car.position = [centre[0] + dist * beta.cos(), centre[1] + dist * beta.sin()];
                car.velocity = [v * heading.cos(), v * heading.sin()];
                Ok(crash_setup(car, 0.0, 0.0))
            }
            SetId::B3 => iso_setup(self.iso.as_ref().expect("validated"), params),
        }
    }
}

fn crash_setup(car: CarObstacle, start_x: f64, speed: f64) -> SimSetup {
    SimSetup {
        env: Environment {
            road: RoadProfile::flat(),
            car: Some(car),
        },
        start_x,
        speed,
        controls: Controls::default(),
        horizon: CRASH_HORIZON,
        post_contact: Some(POST_CONTACT),
        dt: DEFAULT_DT,
    }
}

/// Footprint of the resting motorcycle with its CG at the origin.
fn footprint(params: &MotoParams) -> Result<MotoGeometry> {
    Ok(geometry(params, &static_equilibrium(params, 0.0, 0.0)?))
}

fn part(geo: &MotoGeometry, which: MotoPart) -> crate::dynamics::PartBox {
    *geo.parts.iter().find(|p| p.part == which).expect("all parts present")
}

/// Places both vehicles so the coded contact points meet [`PRE_CONTACT`]
/// seconds into the run, assuming straight-line motion until then.
fn iso_setup(cfg: &IsoConfig, params: &MotoParams) -> Result<SimSetup> {
    let foot = footprint(params)?;
    let mid = |b: crate::dynamics::PartBox| (b.x_min + b.x_max) / 2.0;
    let moto_point = |side: f64| -> ([f64; 2], [f64; 2]) {
        match cfg.moto_region {
            1 => ([part(&foot, MotoPart::FrontWheel).x_max, 0.0], [1.0, 0.0]),
            2 => {
                let b = part(&foot, MotoPart::Handlebar);
                ([mid(b), side * b.half_width], [0.0, side])
            }
            3 => {
                let b = part(&foot, MotoPart::Body);
                ([mid(b), side * b.half_width], [0.0, side])
            }
            4 => {
                let b = part(&foot, MotoPart::RearWheel);
                ([mid(b), side * b.half_width], [0.0, side])
            }
            _ => ([part(&foot, MotoPart::RearWheel).x_min, 0.0], [-1.0, 0.0]),
        }
    };
    let yaw = cfg.car_yaw();
    let (s, c) = yaw.sin_cos();
    let to_world = |v: [f64; 2]| [c * v[0] - s * v[1], s * v[0] + c * v[1]];
    let template = CarObstacle::saloon([0.0, 0.0], yaw);

    // pick the sides that make the two contact surfaces face each other
    let mut best: Option<(f64, [f64; 2], [f64; 2], [f64; 2])> = None;
    for moto_side in [1.0, -1.0] {
        for car_side in [1.0, -1.0] {
            let (pm, nm) = moto_point(moto_side);
            let (pc, nc) = cfg.car_point(template.length, template.width, car_side);
            let score = -(to_world(nc)[0] * nm[0] + to_world(nc)[1] * nm[1]);
            if best.as_ref().is_none_or(|b| score > b.0 + 1e-9) {
                best = Some((score, pm, nm, pc));
            }
        }
    }
    let (score, pm, nm, pc) = best.expect("non-empty search");
    if score <= 0.0 {
        return Err(Error::validation(format!(
            "impact code `{}`: contact surfaces cannot face each other",
            cfg.code
        )));
    }
    let pc_world = to_world(pc);
    let impact = [
        pm[0] - pc_world[0] - ENGAGEMENT * nm[0],
        pm[1] - pc_world[1] - ENGAGEMENT * nm[1],
    ];
    let vel = [cfg.car_speed * c, cfg.car_speed * s];
    let mut car = template;
    car.position = [impact[0] - vel[0] * PRE_CONTACT, impact[1] - vel[1] * PRE_CONTACT];
    car.velocity = vel;
    Ok(crash_setup(car, -cfg.moto_speed * PRE_CONTACT, cfg.moto_speed))
}

/// Builds the B.1 crash: the motorcycle rides at `speed` towards a stationary
/// car rotated by `alpha_deg` and shifted sideways by `offset`.
pub fn build_crash_b1(speed: f64, alpha_deg: f64, offset: f64) -> Result<ScenarioSpec> {
    let spec = ScenarioSpec {
        id: format!("B1-v{speed:.2}-a{alpha_deg:.1}-o{offset:.2}"),
        set: SetId::B1,
        params: [("speed", speed), ("alpha", alpha_deg), ("offset", offset)]
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect(),
        obstacle: None,
        iso: None,
        seed: 0,
    };
    spec.validate()?;
    Ok(spec)
}

/// Builds the B.2 crash: a car approaching the stationary motorcycle from
/// direction `beta_deg`, aimed off its centre by `gamma_deg`.
pub fn build_crash_b2(car_speed: f64, beta_deg: f64, gamma_deg: f64) -> Result<ScenarioSpec> {
    let spec = ScenarioSpec {
        id: format!("B2-v{car_speed:.2}-b{beta_deg:.1}-g{gamma_deg:.2}"),
        set: SetId::B2,
        params: [("car_speed", car_speed), ("beta", beta_deg), ("gamma", gamma_deg)]
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect(),
        obstacle: None,
        iso: None,
        seed: 0,
    };
    spec.validate()?;
    Ok(spec)
}

fn set_seed(seed: u64, set: SetId) -> u64 {
    let idx = SetId::ALL.iter().position(|&s| s == set).unwrap_or(0) as u64;
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(idx + 1)
}

fn named(ranges: &[ParamRange], row: &[f64]) -> BTreeMap<String, f64> {
    ranges.iter().zip(row).map(|(r, &v)| (r.name.clone(), v)).collect()
}

/// Generates `n` scenarios of `set`. Deterministic in `(set, n, seed)`.
///
/// A.2 spreads `n` over its five obstacle kinds; B.3 takes the first `n`
/// catalog entries and cannot exceed the catalog size.
pub fn build_set(set: SetId, n: usize, seed: u64) -> Result<Vec<ScenarioSpec>> {
    let base = set_seed(seed, set);
    let prefix = set.name().replace('.', "");
    match set {
        SetId::A1 | SetId::B1 | SetId::B2 => {
            let ranges = set.ranges();
            let rows = lhs_sample(&ranges, n, base)?;
            Ok(rows
                .iter()
                .enumerate()
                .map(|(i, row)| ScenarioSpec {
                    id: format!("{prefix}-{i:03}"),
                    set,
                    params: named(&ranges, row),
                    obstacle: None,
                    iso: None,
                    seed: base.wrapping_add(1000 + i as u64),
                })
                .collect())
        }
        SetId::A2 => {
            let kinds = ObstacleKind::ALL;
            let mut out = Vec::with_capacity(n);
            for (k, kind) in kinds.into_iter().enumerate() {
                let count = n / kinds.len() + usize::from(k < n % kinds.len());
                if count == 0 {
                    continue;
                }
                let (lo, hi) = kind.size_range();
                let mut ranges = set.ranges();
                ranges.push(ParamRange::new("size", lo, hi));
                let rows = lhs_sample(&ranges, count, base.wrapping_add(k as u64))?;
                for (i, row) in rows.iter().enumerate() {
                    out.push(ScenarioSpec {
                        id: format!("{prefix}-{}-{i:02}", kind.name()),
                        set,
                        params: named(&ranges, row),
                        obstacle: Some(kind),
                        iso: None,
                        seed: 0,
                    });
                }
            }
            Ok(out)
        }
        SetId::B3 => {
            let catalog = iso_catalog();
            if n > catalog.len() {
                return Err(Error::validation(format!(
                    "B.3 has {} configurations, {n} requested",
                    catalog.len()
                )));
            }
            Ok(catalog
                .into_iter()
                .take(n)
                .enumerate()
                .map(|(i, cfg)| ScenarioSpec {
                    id: format!("{prefix}-{i:02}-{}", cfg.code.replace('/', "_")),
                    set,
                    params: [("car_speed", cfg.car_speed), ("moto_speed", cfg.moto_speed)]
                        .into_iter()
                        .map(|(k, v)| (k.to_string(), v))
                        .collect(),
                    obstacle: None,
                    iso: Some(cfg),
                    seed: 0,
                })
                .collect())
        }
    }
}

/// Writes scenarios as JSON lines.
pub fn write_manifest<W: Write>(mut w: W, specs: &[ScenarioSpec]) -> Result<()> {
    for s in specs {
        serde_json::to_writer(&mut w, s)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

/// Reads scenarios written by [`write_manifest`].
pub fn read_manifest<R: BufRead>(r: R) -> Result<Vec<ScenarioSpec>> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let spec: ScenarioSpec = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        spec.validate()?;
        out.push(spec);
    }
    Ok(out)
}
