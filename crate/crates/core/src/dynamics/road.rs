//! Piecewise-linear road height profile.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Horizontal distance between two height samples (m).
pub const ROAD_SPACING: f64 = 0.2;
/// Length of the sampled road section (m).
pub const ROAD_LENGTH: f64 = 300.0;
/// Number of height samples covering [`ROAD_LENGTH`].
pub const ROAD_SAMPLES: usize = 1501;
/// Length of the flat start platform placed before `x = 0` (m).
pub const PLATFORM_LENGTH: f64 = 10.0;

/// Height samples `z(x)` on a uniform 0.2 m grid starting at `x = 0`, preceded by
/// a flat start platform at the height of the first sample. Beyond the last sample
/// the road continues flat.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoadProfile {
    heights: Vec<f64>,
}

impl RoadProfile {
    pub fn new(heights: Vec<f64>) -> Result<Self> {
        if heights.len() != ROAD_SAMPLES {
            return Err(Error::validation(format!(
                "road profile needs {ROAD_SAMPLES} samples, got {}",
                heights.len()
            )));
        }
        if let Some(i) = heights.iter().position(|h| !h.is_finite()) {
            return Err(Error::validation(format!("road height {i} is not finite")));
        }
        Ok(Self { heights })
    }

    pub fn flat() -> Self {
        Self {
            heights: vec![0.0; ROAD_SAMPLES],
        }
    }

    pub fn heights(&self) -> &[f64] {
        &self.heights
    }

    pub fn spacing(&self) -> f64 {
        ROAD_SPACING
    }

    pub fn length(&self) -> f64 {
        (self.heights.len() - 1) as f64 * ROAD_SPACING
    }

    /// Sample position of height index `i`.
    pub fn x_at(i: usize) -> f64 {
        i as f64 * ROAD_SPACING
    }

    /// Height and slope (dz/dx) at `x`.
    pub fn height_slope(&self, x: f64) -> (f64, f64) {
        let last = self.heights.len() - 1;
        if x <= 0.0 {
            return (self.heights[0], 0.0);
        }
        let u = x / ROAD_SPACING;
        let i = u.floor() as usize;
        if i >= last {
            return (self.heights[last], 0.0);
        }
        let (z0, z1) = (self.heights[i], self.heights[i + 1]);
        let frac = u - i as f64;
        (z0 + (z1 - z0) * frac, (z1 - z0) / ROAD_SPACING)
    }

    pub fn height(&self, x: f64) -> f64 {
        self.height_slope(x).0
    }

    /// Largest absolute segment gradient.
    pub fn max_gradient(&self) -> f64 {
        self.heights
            .windows(2)
            .map(|w| ((w[1] - w[0]) / ROAD_SPACING).abs())
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interpolates_between_samples() {
        let mut h = vec![0.0; ROAD_SAMPLES];
        h[1] = 0.2;
        let road = RoadProfile::new(h).unwrap();
        let (z, s) = road.height_slope(0.1);
        assert!((z - 0.1).abs() < 1e-12);
        assert!((s - 1.0).abs() < 1e-12);
        assert_eq!(road.height(-5.0), 0.0);
        assert_eq!(road.height(1e4), 0.0);
    }

    #[test]
    fn rejects_wrong_length() {
        assert!(RoadProfile::new(vec![0.0; 10]).is_err());
        let mut h = vec![0.0; ROAD_SAMPLES];
        h[3] = f64::NAN;
        assert!(RoadProfile::new(h).is_err());
    }

    #[test]
    fn flat_road_is_300m() {
        let road = RoadProfile::flat();
        assert!((road.length() - ROAD_LENGTH).abs() < 1e-9);
        assert_eq!(road.max_gradient(), 0.0);
    }
}
