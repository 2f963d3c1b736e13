//! Physical parameters of the planar motorcycle model.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Point in frame-local coordinates (forward `u`, up `w`) relative to the frame CG.
pub type Local = [f64; 2];

/// Mass, inertia, geometry and force-element parameters.
///
/// The defaults describe a mid-size road motorcycle of about 250 kg with a 1.5 m
/// wheelbase and 0.3 m wheels. They are stand-in values; every field can be
/// overridden from the experiment config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MotoParams {
    pub frame_mass: f64,
    pub frame_pitch_inertia: f64,
    pub front_wheel_mass: f64,
    pub rear_wheel_mass: f64,
    pub front_wheel_inertia: f64,
    pub rear_wheel_inertia: f64,
    pub front_wheel_radius: f64,
    pub rear_wheel_radius: f64,

    /// Steering head in frame coordinates.
    pub steering_head: Local,
    /// Fork inclination from vertical (rad); the hub sits ahead of the steering head.
    pub fork_rake: f64,
    /// Steering head to hub distance at zero fork travel (m).
    pub fork_length: f64,
    /// Swing-arm pivot in frame coordinates.
    pub swingarm_pivot: Local,
    pub swingarm_length: f64,
    /// Swing-arm angle below horizontal at zero rear-swing angle (rad).
    pub swingarm_angle: f64,

    pub front_susp_stiffness: f64,
    pub front_susp_damping: f64,
    pub front_susp_preload: f64,
    /// Fork travel limits (m), compression positive.
    pub front_travel: [f64; 2],
    pub rear_swing_stiffness: f64,
    pub rear_swing_damping: f64,
    pub rear_swing_preload: f64,
    /// Rear-swing angle limits (rad), compression positive.
    pub rear_travel: [f64; 2],
    pub bump_stop_stiffness: f64,

    /// Torque about the steering head at which the fork starts to bend (N·m).
    pub deflection_yield_torque: f64,
    /// Hardening of the bent fork (N·m/rad).
    pub deflection_stiffness: f64,
    pub deflection_damping: f64,

    pub tire_stiffness: f64,
    pub tire_damping: f64,
    pub tire_friction: f64,
    /// Slip speed over which tire friction saturates (m/s).
    pub tire_slip_scale: f64,
    /// Spin rate over which brake torque saturates (rad/s).
    pub brake_spin_scale: f64,

    pub front_tire_half_width: f64,
    pub rear_tire_half_width: f64,
    /// Frame body extent along `u` (m), relative to the CG.
    pub body_extent: [f64; 2],
    pub body_half_width: f64,
    /// Handlebar position along `u` and its half width (m).
    pub handlebar_u: f64,
    pub handlebar_half_width: f64,
    /// Height above the CG at which car contact loads the frame (m).
    pub body_contact_height: f64,
    /// Handlebar ends and mirrors are compliant and give way: linear contact
    /// stiffness (N/m) capped at a breakaway force (N).
    pub handlebar_contact_stiffness: f64,
    pub handlebar_breakaway_force: f64,

    pub gravity: f64,
}

impl Default for MotoParams {
    fn default() -> Self {
        let rake = 26f64.to_radians();
        let front_hub = [0.825, -0.25];
        let fork_length = 0.75;
        Self {
            frame_mass: 220.0,
            frame_pitch_inertia: 45.0,
            front_wheel_mass: 12.0,
            rear_wheel_mass: 16.0,
            front_wheel_inertia: 0.5,
            rear_wheel_inertia: 0.7,
            front_wheel_radius: 0.3,
            rear_wheel_radius: 0.3,
            steering_head: [
                front_hub[0] - fork_length * rake.sin(),
                front_hub[1] + fork_length * rake.cos(),
            ],
            fork_rake: rake,
            fork_length,
            swingarm_pivot: [
                -0.675 + 0.55 * 10f64.to_radians().cos(),
                -0.25 + 0.55 * 10f64.to_radians().sin(),
            ],
            swingarm_length: 0.55,
            swingarm_angle: 10f64.to_radians(),
            front_susp_stiffness: 22_000.0,
            front_susp_damping: 1_500.0,
            front_susp_preload: 950.0,
            front_travel: [-0.05, 0.12],
            rear_swing_stiffness: 9_000.0,
            rear_swing_damping: 400.0,
            rear_swing_preload: 640.0,
            rear_travel: [-0.12, 0.25],
            bump_stop_stiffness: 1.0e6,
            deflection_yield_torque: 13_000.0,
            deflection_stiffness: 50_000.0,
            deflection_damping: 200.0,
            tire_stiffness: 1.5e5,
            tire_damping: 400.0,
            tire_friction: 0.9,
            tire_slip_scale: 0.1,
            brake_spin_scale: 0.5,
            front_tire_half_width: 0.06,
            rear_tire_half_width: 0.08,
            body_extent: [-0.55, 0.45],
            body_half_width: 0.22,
            handlebar_u: 0.40,
            handlebar_half_width: 0.40,
            body_contact_height: 0.15,
            handlebar_contact_stiffness: 3.0e4,
            handlebar_breakaway_force: 4_000.0,
            gravity: 9.81,
        }
    }
}

impl MotoParams {
    pub fn total_mass(&self) -> f64 {
        self.frame_mass + self.front_wheel_mass + self.rear_wheel_mass
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("frame_mass", self.frame_mass),
            ("frame_pitch_inertia", self.frame_pitch_inertia),
            ("front_wheel_mass", self.front_wheel_mass),
            ("rear_wheel_mass", self.rear_wheel_mass),
            ("front_wheel_inertia", self.front_wheel_inertia),
            ("rear_wheel_inertia", self.rear_wheel_inertia),
            ("front_wheel_radius", self.front_wheel_radius),
            ("rear_wheel_radius", self.rear_wheel_radius),
            ("fork_length", self.fork_length),
            ("swingarm_length", self.swingarm_length),
            ("front_susp_stiffness", self.front_susp_stiffness),
            ("rear_swing_stiffness", self.rear_swing_stiffness),
            ("bump_stop_stiffness", self.bump_stop_stiffness),
            ("deflection_yield_torque", self.deflection_yield_torque),
            ("deflection_stiffness", self.deflection_stiffness),
            ("tire_stiffness", self.tire_stiffness),
            ("tire_slip_scale", self.tire_slip_scale),
            ("brake_spin_scale", self.brake_spin_scale),
            ("gravity", self.gravity),
            ("handlebar_contact_stiffness", self.handlebar_contact_stiffness),
            ("handlebar_breakaway_force", self.handlebar_breakaway_force),
        ];
        let damping = [
            ("front_susp_damping", self.front_susp_damping),
            ("rear_swing_damping", self.rear_swing_damping),
            ("deflection_damping", self.deflection_damping),
            ("tire_damping", self.tire_damping),
        ];
        let mut problems = Vec::new();
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                problems.push(format!("{name} must be > 0 (got {v})"));
            }
        }
        for (name, v) in damping {
            if !(v.is_finite() && v >= 0.0) {
                problems.push(format!("{name} must be >= 0 (got {v})"));
            }
        }
        if !(0.0..=2.0).contains(&self.tire_friction) {
            problems.push(format!(
                "tire_friction must lie in [0, 2] (got {})",
                self.tire_friction
            ));
        }
        if self.front_travel[0] >= self.front_travel[1] || self.rear_travel[0] >= self.rear_travel[1] {
            problems.push("suspension travel limits must be increasing".into());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::validation(problems.join("; ")))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_is_valid_midsize_bike() {
        let p = MotoParams::default();
        p.validate().unwrap();
        assert!((p.total_mass() - 248.0).abs() < 1e-9);
        // wheelbase from the hub positions implied by the geometry
        let front_hub_u = p.steering_head[0] + p.fork_length * p.fork_rake.sin();
        let rear_hub_u = p.swingarm_pivot[0] - p.swingarm_length * p.swingarm_angle.cos();
        assert!((front_hub_u - rear_hub_u - 1.5).abs() < 1e-9);
    }

    #[test]
    fn validation_lists_every_problem() {
        let p = MotoParams {
            frame_mass: -1.0,
            tire_friction: 3.0,
            tire_damping: -2.0,
            ..MotoParams::default()
        };
        let msg = p.validate().unwrap_err().to_string();
        assert!(msg.contains("frame_mass"));
        assert!(msg.contains("tire_friction"));
        assert!(msg.contains("tire_damping"));
    }
}
