//! Standardized motorcycle-car impact configurations.
//!
//! Codes read `XXX-Y/Z`: the first digit is the car contact region, the second
//! the motorcycle contact region, the third the car heading relative to the
//! motorcycle in 45° steps (1 = same direction, 3 = crossing from the right, 5 =
//! oncoming, ...). `Y` and `Z` are car and motorcycle speeds in m/s.
//!
//! Car regions: 1 front centre, 2 front corner, 3 front side, 4 side centre,
//! 5 rear side, 6 rear corner, 7 rear centre.
//! Motorcycle regions: 1 front wheel, 2 handlebar end, 3 body side, 4 rear
//! wheel side, 5 rear wheel.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Grouping used when reporting detection delays.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DelayCategory {
    Frontal,
    LateralRear,
    Grazing,
}

impl DelayCategory {
    pub const ALL: [DelayCategory; 3] = [
        DelayCategory::Frontal,
        DelayCategory::LateralRear,
        DelayCategory::Grazing,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DelayCategory::Frontal => "frontal",
            DelayCategory::LateralRear => "lateral/rear",
            DelayCategory::Grazing => "grazing",
        }
    }

    /// Category implied by the motorcycle contact region.
    pub fn from_moto_region(region: u8) -> Option<Self> {
        match region {
            1 => Some(DelayCategory::Frontal),
            2 => Some(DelayCategory::Grazing),
            3..=5 => Some(DelayCategory::LateralRear),
            _ => None,
        }
    }
}

/// One catalog entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsoConfig {
    pub code: String,
    pub car_region: u8,
    pub moto_region: u8,
    pub heading: u8,
    pub car_speed: f64,
    pub moto_speed: f64,
    pub category: DelayCategory,
    /// Where the configuration comes from.
    pub note: String,
}

impl IsoConfig {
    pub fn parse(code: &str, note: &str) -> Result<Self> {
        let bad = |why: &str| Error::validation(format!("impact code `{code}`: {why}"));
        let (digits, speeds) = code.split_once('-').ok_or_else(|| bad("missing `-`"))?;
        let d: Vec<u8> = digits
            .chars()
            .map(|c| c.to_digit(10).map(|v| v as u8))
            .collect::<Option<_>>()
            .ok_or_else(|| bad("non-digit region"))?;
        if d.len() != 3 {
            return Err(bad("expected three digits"));
        }
        let (y, z) = speeds.split_once('/').ok_or_else(|| bad("missing `/`"))?;
        let car_speed: f64 = y.parse().map_err(|_| bad("bad car speed"))?;
        let moto_speed: f64 = z.parse().map_err(|_| bad("bad motorcycle speed"))?;
        if !(1..=7).contains(&d[0]) || !(1..=5).contains(&d[1]) || !(1..=8).contains(&d[2]) {
            return Err(bad("region or heading out of range"));
        }
        if !(0.0..=20.0).contains(&car_speed) || !(0.0..=20.0).contains(&moto_speed) {
            return Err(bad("speed out of range"));
        }
        if car_speed == 0.0 && moto_speed == 0.0 {
            return Err(bad("both vehicles at rest"));
        }
        Ok(Self {
            code: code.to_string(),
            car_region: d[0],
            moto_region: d[1],
            heading: d[2],
            car_speed,
            moto_speed,
            category: DelayCategory::from_moto_region(d[1]).ok_or_else(|| bad("region"))?,
            note: note.to_string(),
        })
    }

    /// Car yaw relative to the motorcycle heading (rad).
    pub fn car_yaw(&self) -> f64 {
        (45.0 * (self.heading as f64 - 1.0)).to_radians()
    }

    /// Contact point and outward normal on the car, in car coordinates, for
    /// the given side sign.
    pub fn car_point(&self, length: f64, width: f64, side: f64) -> ([f64; 2], [f64; 2]) {
        let (hl, hw) = (length / 2.0, width / 2.0);
        let diag = std::f64::consts::FRAC_1_SQRT_2;
        match self.car_region {
            1 => ([hl, 0.0], [1.0, 0.0]),
            2 => ([hl, side * hw], [diag, side * diag]),
            3 => ([hl - 0.9, side * hw], [0.0, side]),
            4 => ([0.0, side * hw], [0.0, side]),
            5 => ([-hl + 0.9, side * hw], [0.0, side]),
            6 => ([-hl, side * hw], [-diag, side * diag]),
            _ => ([-hl, 0.0], [-1.0, 0.0]),
        }
    }
}

const RECONSTRUCTED: &str =
    "reconstructed from the region/heading convention; not checked against the standard's table";

/// The 25 impact configurations of set B.3.
pub fn iso_catalog() -> Vec<IsoConfig> {
    const CODES: [&str; 25] = [
        // frontal
        "413-0/13.4",
        "413-0/9.8",
        "413-6.7/13.4",
        "313-6.7/13.4",
        "412-0/13.4",
        "414-0/13.4",
        "115-6.7/13.4",
        "114-6.7/13.4",
        "215-6.7/13.4",
        "711-0/13.4",
        "711-6.7/13.4",
        // lateral and rear
        "143-6.7/0",
        "143-9.8/0",
        "143-6.7/6.7",
        "147-6.7/6.7",
        "142-6.7/6.7",
        "144-6.7/6.7",
        "153-9.8/0",
        "151-13.4/0",
        "151-13.4/6.7",
        // grazing
        "225-6.7/13.4",
        "225-0/13.4",
        "621-0/13.4",
        "221-13.4/6.7",
        "621-6.7/13.4",
    ];
    CODES
        .iter()
        .map(|c| IsoConfig::parse(c, RECONSTRUCTED).expect("catalog codes are valid"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalog_has_25_unique_entries() {
        let cat = iso_catalog();
        assert_eq!(cat.len(), 25);
        let mut codes: Vec<_> = cat.iter().map(|c| c.code.clone()).collect();
        codes.sort();
        codes.dedup();
        assert_eq!(codes.len(), 25);
        for cat in DelayCategory::ALL {
            assert!(iso_catalog().iter().any(|c| c.category == cat));
        }
    }

    #[test]
    fn parses_fields() {
        let c = IsoConfig::parse("143-6.7/0", "x").unwrap();
        assert_eq!((c.car_region, c.moto_region, c.heading), (1, 4, 3));
        assert_eq!(c.car_speed, 6.7);
        assert_eq!(c.moto_speed, 0.0);
        assert_eq!(c.category, DelayCategory::LateralRear);
        assert!((c.car_yaw() - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
    }

    #[test]
    fn rejects_malformed_codes() {
        for code in ["1436.7/0", "14-6.7/0", "943-6.7/0", "143-a/0", "143-0/0", "149-1/1"] {
            assert!(IsoConfig::parse(code, "").is_err(), "{code}");
        }
    }
}
