//! Top-view penalty contact between the motorcycle and a rectangular car.
//!
//! The motorcycle stays on the line `y = 0` and is described by one axis-aligned
//! box per part. The car is a rotated rectangle. Penetration is measured by
//! sampling the part outline against the car and the car corners against the part,
//! keeping the deepest point.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rigid rectangle standing in for the accident opponent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CarObstacle {
    pub length: f64,
    pub width: f64,
    /// Heading of the car's long axis, counter-clockwise from the motorcycle's +x (rad).
    pub yaw: f64,
    pub position: [f64; 2],
    pub velocity: [f64; 2],
    pub stiffness: f64,
    pub damping: f64,
    pub mass: f64,
}

impl CarObstacle {
    /// A 4.7 m × 1.8 m, 1300 kg saloon at rest.
    pub fn saloon(position: [f64; 2], yaw: f64) -> Self {
        Self {
            length: 4.7,
            width: 1.8,
            yaw: yaw.rem_euclid(TAU),
            position,
            velocity: [0.0, 0.0],
            stiffness: 2.5e5,
            damping: 2.0e3,
            mass: 1300.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.length > 0.0 && self.width > 0.0) {
            return Err(Error::validation("car footprint must be positive"));
        }
        if !(0.0..TAU).contains(&self.yaw) {
            return Err(Error::validation(format!("car yaw {} outside [0, 2π)", self.yaw)));
        }
        if !(self.stiffness > 0.0 && self.damping >= 0.0 && self.mass > 0.0) {
            return Err(Error::validation("car contact stiffness/mass must be positive"));
        }
        Ok(())
    }

    fn axes(&self) -> ([f64; 2], [f64; 2]) {
        let (s, c) = self.yaw.sin_cos();
        ([c, s], [-s, c])
    }

    pub fn corners(&self) -> [[f64; 2]; 4] {
        let (ax, ay) = self.axes();
        let (hl, hw) = (self.length / 2.0, self.width / 2.0);
        let mut out = [[0.0; 2]; 4];
        for (k, (sl, sw)) in [(1.0, 1.0), (-1.0, 1.0), (-1.0, -1.0), (1.0, -1.0)]
            .into_iter()
            .enumerate()
        {
            out[k] = [
                self.position[0] + sl * hl * ax[0] + sw * hw * ay[0],
                self.position[1] + sl * hl * ax[1] + sw * hw * ay[1],
            ];
        }
        out
    }

    /// Penetration depth of `p` and outward face normal, if `p` is inside.
    fn inside(&self, p: [f64; 2]) -> Option<(f64, [f64; 2])> {
        let (ax, ay) = self.axes();
        let d = [p[0] - self.position[0], p[1] - self.position[1]];
        let lx = d[0] * ax[0] + d[1] * ax[1];
        let ly = d[0] * ay[0] + d[1] * ay[1];
        let dx = self.length / 2.0 - lx.abs();
        let dy = self.width / 2.0 - ly.abs();
        if dx <= 0.0 || dy <= 0.0 {
            return None;
        }
        if dx < dy {
            let s = lx.signum();
            Some((dx, [s * ax[0], s * ax[1]]))
        } else {
            let s = ly.signum();
            Some((dy, [s * ay[0], s * ay[1]]))
        }
    }

    fn aabb(&self) -> [f64; 4] {
        let c = self.corners();
        let mut b = [f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY];
        for p in c {
            b[0] = b[0].min(p[0]);
            b[1] = b[1].max(p[0]);
            b[2] = b[2].min(p[1]);
            b[3] = b[3].max(p[1]);
        }
        b
    }
}

/// Motorcycle parts that can touch the car.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MotoPart {
    FrontWheel,
    RearWheel,
    /// Frame body carrying the side contact sensors.
    Body,
    Handlebar,
}

impl MotoPart {
    pub const ALL: [MotoPart; 4] = [
        MotoPart::FrontWheel,
        MotoPart::RearWheel,
        MotoPart::Body,
        MotoPart::Handlebar,
    ];
}

/// Bodies involved in a [`ContactEvent`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "part")]
pub enum BodyPair {
    MotoCar(MotoPart),
    FrontWheelRoad,
    RearWheelRoad,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Left,
    Right,
}

/// Onset of a contact between two bodies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContactEvent {
    pub time: f64,
    pub bodies: BodyPair,
    pub normal_force: f64,
    /// Set for frame-car contacts only.
    pub side: Option<Side>,
}

/// Top-view box of one motorcycle part (`y` symmetric about the centreline).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PartBox {
    pub part: MotoPart,
    pub x_min: f64,
    pub x_max: f64,
    pub half_width: f64,
}

/// Top-view footprint of the whole motorcycle at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct MotoGeometry {
    pub parts: Vec<PartBox>,
}

/// Deepest penetration of one part into the car.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PartContact {
    pub part: MotoPart,
    pub depth: f64,
    /// Unit direction in which the car pushes the part.
    pub normal: [f64; 2],
    pub point: [f64; 2],
}

const EDGE_SAMPLES: usize = 8;

impl PartBox {
    fn contains(&self, p: [f64; 2]) -> Option<(f64, [f64; 2])> {
        let dx0 = p[0] - self.x_min;
        let dx1 = self.x_max - p[0];
        let dy = self.half_width - p[1].abs();
        if dx0 <= 0.0 || dx1 <= 0.0 || dy <= 0.0 {
            return None;
        }
        // the car corner entered through the closest face; push the part away from it
        if dy <= dx0 && dy <= dx1 {
            Some((dy, [0.0, -p[1].signum()]))
        } else if dx0 < dx1 {
            Some((dx0, [1.0, 0.0]))
        } else {
            Some((dx1, [-1.0, 0.0]))
        }
    }

    fn outline(&self) -> impl Iterator<Item = [f64; 2]> + '_ {
        let n = EDGE_SAMPLES;
        (0..=n).flat_map(move |k| {
            let x = self.x_min + (self.x_max - self.x_min) * k as f64 / n as f64;
            [[x, self.half_width], [x, -self.half_width], [x, 0.0]]
        })
        .chain((1..4).flat_map(move |k| {
            let y = -self.half_width + 2.0 * self.half_width * k as f64 / 4.0;
            [[self.x_min, y], [self.x_max, y]]
        }))
    }

    /// Deepest penetration of this part by `car`.
    pub fn penetration(&self, car: &CarObstacle) -> Option<PartContact> {
        let b = car.aabb();
        if b[1] <= self.x_min || b[0] >= self.x_max || b[3] <= -self.half_width || b[2] >= self.half_width {
            return None;
        }
        let mut best: Option<PartContact> = None;
        let mut keep = |depth: f64, normal: [f64; 2], point: [f64; 2]| {
            if best.is_none_or(|c| depth > c.depth) {
                best = Some(PartContact {
                    part: self.part,
                    depth,
                    normal,
                    point,
                });
            }
        };
        for p in self.outline() {
            if let Some((d, n)) = car.inside(p) {
                keep(d, n, p);
            }
        }
        for c in car.corners() {
            if let Some((d, n)) = self.contains(c) {
                keep(d, n, c);
            }
        }
        best
    }
}

impl MotoGeometry {
    pub fn contacts(&self, car: &CarObstacle) -> Vec<PartContact> {
        self.parts.iter().filter_map(|p| p.penetration(car)).collect()
    }
}

/// Deepest car contact of the motorcycle footprint, if any.
///
/// The normal force is proportional to the penetration depth (no damping term,
/// which needs velocities). The side flag is set for body contacts from the sign
/// of the contact point's lateral coordinate: positive `y` is left.
pub fn detect_contact(geometry: &MotoGeometry, car: &CarObstacle, time: f64) -> Option<ContactEvent> {
    let deepest = geometry
        .contacts(car)
        .into_iter()
        .max_by(|a, b| a.depth.total_cmp(&b.depth))?;
    Some(ContactEvent {
        time,
        bodies: BodyPair::MotoCar(deepest.part),
        normal_force: car.stiffness * deepest.depth,
        side: (deepest.part == MotoPart::Body).then(|| side_of(deepest.point)),
    })
}

pub(crate) fn side_of(point: [f64; 2]) -> Side {
    if point[1] >= 0.0 {
        Side::Left
    } else {
        Side::Right
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn body(x_min: f64, x_max: f64) -> MotoGeometry {
        MotoGeometry {
            parts: vec![PartBox {
                part: MotoPart::Body,
                x_min,
                x_max,
                half_width: 0.22,
            }],
        }
    }

    #[test]
    fn separated_footprints_do_not_touch() {
        let g = body(-0.5, 0.5);
        // car rear face 1 m ahead of the body front
        let car = CarObstacle::saloon([0.5 + 1.0 + 2.35, 0.0], 0.0);
        assert!(detect_contact(&g, &car, 0.0).is_none());
    }

    #[test]
    fn coincident_footprints_touch() {
        let g = body(-0.5, 0.5);
        let car = CarObstacle::saloon([0.0, 0.0], 0.0);
        let ev = detect_contact(&g, &car, 0.0).unwrap();
        assert!(ev.normal_force > 0.0);
    }

    #[test]
    fn side_flag_follows_contact_point() {
        let g = body(-0.5, 0.5);
        // car alongside on the left, overlapping the body by 5 cm
        let car = CarObstacle::saloon([0.0, 0.22 + 0.9 - 0.05], 0.0);
        let ev = detect_contact(&g, &car, 0.3).unwrap();
        assert_eq!(ev.side, Some(Side::Left));
        assert!((ev.normal_force - 0.05 * car.stiffness).abs() < 1e-6);
        let car = CarObstacle::saloon([0.0, -(0.22 + 0.9 - 0.05)], 0.0);
        assert_eq!(detect_contact(&g, &car, 0.3).unwrap().side, Some(Side::Right));
    }

    #[test]
    fn head_on_pushes_backwards() {
        let part = PartBox {
            part: MotoPart::FrontWheel,
            x_min: -0.3,
            x_max: 0.3,
            half_width: 0.06,
        };
        let car = CarObstacle::saloon([0.3 + 0.9 - 0.02, 0.0], std::f64::consts::FRAC_PI_2);
        let c = part.penetration(&car).unwrap();
        assert!((c.depth - 0.02).abs() < 1e-9);
        assert!(c.normal[0] < -0.99);
    }

    #[test]
    fn car_corner_inside_part() {
        let part = PartBox {
            part: MotoPart::Body,
            x_min: -0.5,
            x_max: 0.5,
            half_width: 0.22,
        };
        // rotated car whose top corner pokes into the body from the right
        let mut car = CarObstacle::saloon([0.0, 0.0], std::f64::consts::FRAC_PI_4);
        let c = car.corners()[0];
        car.position = [car.position[0] - c[0], car.position[1] - c[1] - 0.22 + 0.03];
        let hit = part.penetration(&car).unwrap();
        assert!(hit.depth > 0.0);
        assert!(hit.normal[1] > 0.0);
    }

    #[test]
    fn yaw_out_of_range_rejected() {
        let mut car = CarObstacle::saloon([0.0, 0.0], 0.0);
        car.yaw = 7.0;
        assert!(car.validate().is_err());
        assert!((CarObstacle::saloon([0.0, 0.0], -0.5).yaw - (TAU - 0.5)).abs() < 1e-12);
    }
}
