//! Road profiles for the non-crash scenario sets.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::{RoadProfile, ROAD_LENGTH, ROAD_SAMPLES};
use crate::error::{Error, Result};

/// Steepest gradient allowed for the sinusoidal base profile.
pub const MAX_GRADIENT: f64 = 0.12;
/// Where A.2 obstacles begin (m).
pub const OBSTACLE_X: f64 = 6.0;

/// Sinusoidal road with superimposed uniform noise.
///
/// One sine period spans the road unless that would exceed [`MAX_GRADIENT`], in
/// which case the period is stretched until the steepest base slope equals it.
pub fn build_road_a1(amplitude: f64, phase_deg: f64, noise: f64, seed: u64) -> Result<RoadProfile> {
    let checks = [
        ("amplitude", amplitude, 0.0, 6.0),
        ("phase", phase_deg, 0.0, 360.0),
        ("noise", noise, 0.0, 0.025),
    ];
    for (name, v, lo, hi) in checks {
        if !(lo..=hi).contains(&v) {
            return Err(Error::validation(format!("{name} = {v} outside [{lo}, {hi}]")));
        }
    }
    let period = ROAD_LENGTH.max(TAU * amplitude / MAX_GRADIENT);
    let phase = phase_deg.to_radians();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let heights = (0..ROAD_SAMPLES)
        .map(|i| {
            let x = RoadProfile::x_at(i);
            let base = amplitude * (TAU * x / period + phase).sin();
            let jitter = if noise > 0.0 {
                rng.random_range(-noise..=noise)
            } else {
                0.0
            };
            base + jitter
        })
        .collect();
    RoadProfile::new(heights)
}

/// Hand-designed obstacle archetypes of set A.2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ObstacleKind {
    Pothole,
    CurbUp,
    CurbDown,
    CurbsDown,
    Speedbump,
}

impl ObstacleKind {
    pub const ALL: [ObstacleKind; 5] = [
        ObstacleKind::Pothole,
        ObstacleKind::CurbUp,
        ObstacleKind::CurbDown,
        ObstacleKind::CurbsDown,
        ObstacleKind::Speedbump,
    ];

    /// Range of the size parameter (depth or height, m).
    pub fn size_range(self) -> (f64, f64) {
        match self {
            ObstacleKind::Pothole => (0.04, 0.10),
            ObstacleKind::CurbUp | ObstacleKind::CurbDown | ObstacleKind::CurbsDown => (0.12, 0.12),
            ObstacleKind::Speedbump => (0.05, 0.10),
        }
    }

    /// Road length the obstacle occupies after [`OBSTACLE_X`] (m).
    pub fn extent(self) -> f64 {
        match self {
            ObstacleKind::Pothole | ObstacleKind::Speedbump => 0.8,
            ObstacleKind::CurbUp | ObstacleKind::CurbDown => 0.2,
            ObstacleKind::CurbsDown => 3.4,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ObstacleKind::Pothole => "pothole",
            ObstacleKind::CurbUp => "curb-up",
            ObstacleKind::CurbDown => "curb-down",
            ObstacleKind::CurbsDown => "curbs-down",
            ObstacleKind::Speedbump => "speedbump",
        }
    }
}

/// Flat road with one obstacle starting at [`OBSTACLE_X`].
pub fn build_obstacle_a2(kind: ObstacleKind, size: f64) -> Result<RoadProfile> {
    let (lo, hi) = kind.size_range();
    if !(size >= lo - 1e-12 && size <= hi + 1e-12) {
        return Err(Error::validation(format!(
            "{} size {size} outside [{lo}, {hi}]",
            kind.name()
        )));
    }
    let len = kind.extent();
    let heights = (0..ROAD_SAMPLES)
        .map(|i| {
            let x = RoadProfile::x_at(i) - OBSTACLE_X;
            let eps = 1e-9;
            match kind {
                ObstacleKind::Pothole => {
                    if x > eps && x < len - eps {
                        -size
                    } else {
                        0.0
                    }
                }
                ObstacleKind::CurbUp => {
                    if x > eps {
                        size
                    } else {
                        0.0
                    }
                }
                ObstacleKind::CurbDown => {
                    if x > eps {
                        -size
                    } else {
                        0.0
                    }
                }
                ObstacleKind::CurbsDown => {
                    let steps = [0.0, 1.6, 3.2].iter().filter(|&&s| x > s + eps).count();
                    -size * steps as f64
                }
                ObstacleKind::Speedbump => {
                    if x > 0.0 && x < len {
                        size * (std::f64::consts::PI * x / len).sin()
                    } else {
                        0.0
                    }
                }
            }
        })
        .collect();
    RoadProfile::new(heights)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_amplitude_is_flat() {
        let r = build_road_a1(0.0, 123.0, 0.0, 1).unwrap();
        assert!(r.heights().iter().all(|&h| h == 0.0));
        assert!((r.length() - 300.0).abs() < 1e-9);
    }

    #[test]
    fn max_amplitude_hits_gradient_limit() {
        for phase in [0.0, 45.0, 200.0] {
            let r = build_road_a1(6.0, phase, 0.0, 1).unwrap();
            let g = r.max_gradient();
            assert!((g - 0.12).abs() <= 0.12 * 1e-3, "gradient {g}");
        }
        // below the limit the period equals the road length
        let r = build_road_a1(3.0, 0.0, 0.0, 1).unwrap();
        assert!((r.max_gradient() - TAU * 3.0 / 300.0).abs() < 1e-4);
    }

    #[test]
    fn opposite_phase_negates_profile() {
        let a = build_road_a1(4.0, 0.0, 0.0, 1).unwrap();
        let b = build_road_a1(4.0, 180.0, 0.0, 1).unwrap();
        for (x, y) in a.heights().iter().zip(b.heights()) {
            assert!((x + y).abs() < 1e-12);
        }
    }

    #[test]
    fn noise_is_bounded_and_seeded() {
        let a = build_road_a1(0.0, 0.0, 0.02, 5).unwrap();
        assert!(a.heights().iter().all(|h| h.abs() <= 0.02));
        assert!(a.heights().iter().any(|h| h.abs() > 0.0));
        assert_eq!(a, build_road_a1(0.0, 0.0, 0.02, 5).unwrap());
    }

    #[test]
    fn out_of_range_rejected() {
        assert!(build_road_a1(7.0, 0.0, 0.0, 1).is_err());
        assert!(build_road_a1(1.0, 400.0, 0.0, 1).is_err());
        assert!(build_road_a1(1.0, 0.0, 0.05, 1).is_err());
        assert!(build_obstacle_a2(ObstacleKind::Pothole, 0.3).is_err());
    }

    #[test]
    fn pothole_depth_and_flat_elsewhere() {
        let r = build_obstacle_a2(ObstacleKind::Pothole, 0.08).unwrap();
        let min = r.heights().iter().cloned().fold(f64::INFINITY, f64::min);
        assert!((min + 0.08).abs() < 1e-12);
        for (i, &h) in r.heights().iter().enumerate() {
            let x = RoadProfile::x_at(i);
            if !(OBSTACLE_X..=OBSTACLE_X + 0.8).contains(&x) {
                assert_eq!(h, 0.0);
            }
        }
    }

    #[test]
    fn curb_up_is_single_monotone_step() {
        let r = build_obstacle_a2(ObstacleKind::CurbUp, 0.12).unwrap();
        let h = r.heights();
        let rises: Vec<f64> = h.windows(2).map(|w| w[1] - w[0]).filter(|d| *d != 0.0).collect();
        assert_eq!(rises.len(), 1);
        assert!((rises[0] - 0.12).abs() < 1e-12);
    }

    #[test]
    fn curbs_down_descend_three_times() {
        let r = build_obstacle_a2(ObstacleKind::CurbsDown, 0.12).unwrap();
        let drops = r.heights().windows(2).filter(|w| w[1] < w[0]).count();
        assert_eq!(drops, 3);
        assert!(r.heights().windows(2).all(|w| w[1] <= w[0]));
        assert!((r.heights()[ROAD_SAMPLES - 1] + 0.36).abs() < 1e-12);
    }

    #[test]
    fn speedbump_is_raised() {
        let r = build_obstacle_a2(ObstacleKind::Speedbump, 0.07).unwrap();
        let max = r.heights().iter().cloned().fold(0.0, f64::max);
        assert!(max > 0.06 && max <= 0.07);
        assert!(r.heights().iter().all(|&h| h >= 0.0));
    }
}
