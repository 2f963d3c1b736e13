//! Planar multibody motorcycle: frame, front wheel on a telescopic fork that can
//! bend plastically about the steering head, rear wheel on a swing arm.
//!
//! Generalized coordinates, in order: frame `x`, `z`, pitch (nose-up positive),
//! fork travel (compression positive), rear-swing angle (compression positive),
//! front deflection (hub moving back positive), front and rear wheel spin
//! (forward rolling positive). The mass matrix is assembled from analytic hub
//! Jacobians and the system is advanced with fixed-step semi-implicit Euler.

mod contact;
mod params;
mod road;

pub use contact::{
    detect_contact, BodyPair, CarObstacle, ContactEvent, MotoGeometry, MotoPart, PartBox,
    PartContact, Side,
};
pub use params::{Local, MotoParams};
pub use road::{RoadProfile, PLATFORM_LENGTH, ROAD_LENGTH, ROAD_SAMPLES, ROAD_SPACING};

use nalgebra::{SMatrix, SVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::{ScenarioSpec, SetId};

pub const NDOF: usize = 8;
/// Default integrator step (s).
pub const DEFAULT_DT: f64 = 1e-4;

pub const X: usize = 0;
pub const Z: usize = 1;
pub const PITCH: usize = 2;
pub const FORK: usize = 3;
pub const SWING: usize = 4;
pub const DEFLECTION: usize = 5;
pub const FRONT_SPIN: usize = 6;
pub const REAR_SPIN: usize = 7;

pub const DOF_NAMES: [&str; NDOF] = [
    "x",
    "z",
    "pitch",
    "fork_travel",
    "rear_swing",
    "front_deflection",
    "front_spin",
    "rear_spin",
];

type Mat = SMatrix<f64, NDOF, NDOF>;
type Vec8 = SVector<f64, NDOF>;
type V2 = [f64; 2];

/// Positions and rates of all degrees of freedom.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotoState {
    pub q: [f64; NDOF],
    pub qd: [f64; NDOF],
    /// The fork is currently bending (plastic flow active).
    pub deflecting: bool,
}

impl MotoState {
    pub fn x(&self) -> f64 {
        self.q[X]
    }
    pub fn z(&self) -> f64 {
        self.q[Z]
    }
    pub fn pitch(&self) -> f64 {
        self.q[PITCH]
    }
    pub fn fork_travel(&self) -> f64 {
        self.q[FORK]
    }
    pub fn rear_swing(&self) -> f64 {
        self.q[SWING]
    }
    pub fn front_deflection(&self) -> f64 {
        self.q[DEFLECTION]
    }
    pub fn speed(&self) -> f64 {
        self.qd[X]
    }

    fn check_finite(&self, time: f64) -> Result<()> {
        for k in 0..NDOF {
            if !self.q[k].is_finite() || !self.qd[k].is_finite() {
                return Err(Error::Integration {
                    time,
                    channel: DOF_NAMES[k],
                });
            }
        }
        Ok(())
    }
}

/// Wheel torques. Brake torques are magnitudes that oppose wheel spin relative to
/// the frame; the drive torque acts on the rear wheel.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Controls {
    pub brake_front: f64,
    pub brake_rear: f64,
    pub drive_rear: f64,
}

impl Controls {
    /// Maps one signed torque to the wheels: braking splits 70/30 front/rear,
    /// acceleration goes to the rear wheel.
    pub fn from_signed_torque(torque: f64) -> Self {
        if torque < 0.0 {
            Self {
                brake_front: -0.7 * torque,
                brake_rear: -0.3 * torque,
                drive_rear: 0.0,
            }
        } else {
            Self {
                drive_rear: torque,
                ..Self::default()
            }
        }
    }
}

/// Road plus optional car; the car moves and reacts to contact forces.
#[derive(Debug, Clone, PartialEq)]
pub struct Environment {
    pub road: RoadProfile,
    pub car: Option<CarObstacle>,
}

/// Contact loads evaluated at the start of a step.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ContactLoads {
    /// Tire-road normal force, front and rear (N).
    pub road_normal: [f64; 2],
    /// Car force magnitude on the front and rear wheel (N).
    pub car_on_wheel: [f64; 2],
    /// Car force magnitude per part, indexed like [`MotoPart::ALL`].
    pub car_on_part: [f64; 4],
    pub sensor_left: bool,
    pub sensor_right: bool,
}

impl ContactLoads {
    pub fn car_contact(&self) -> bool {
        self.car_on_part.iter().any(|&f| f > 0.0)
    }
}

/// Result of one integrator step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub state: MotoState,
    /// Generalized accelerations at the start of the step.
    pub accel: [f64; NDOF],
    pub loads: ContactLoads,
}

fn rot(c: f64, s: f64, v: V2) -> V2 {
    [c * v[0] - s * v[1], s * v[0] + c * v[1]]
}

fn perp(v: V2) -> V2 {
    [-v[1], v[0]]
}

fn add(a: V2, b: V2) -> V2 {
    [a[0] + b[0], a[1] + b[1]]
}

fn scale(k: f64, v: V2) -> V2 {
    [k * v[0], k * v[1]]
}

fn dot(a: V2, b: V2) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

/// World position, velocity, Jacobian and velocity-product acceleration of a point.
#[derive(Debug, Clone, Copy)]
struct PointKin {
    pos: V2,
    vel: V2,
    jac: [[f64; NDOF]; 2],
    bias: V2,
}

impl PointKin {
    fn apply(&self, force: V2, out: &mut Vec8) {
        for k in 0..NDOF {
            out[k] += self.jac[0][k] * force[0] + self.jac[1][k] * force[1];
        }
    }
}

struct Kinematics {
    front_hub: PointKin,
    rear_hub: PointKin,
    cos: f64,
    sin: f64,
}

/// Local hub position and its derivatives with respect to the suspension
/// coordinates feeding it.
struct LocalHub {
    h: V2,
    /// (coordinate index, first derivative)
    first: [(usize, V2); 2],
    /// sum of second-derivative terms times rate products
    quad: V2,
    hdot: V2,
}

fn front_local(p: &MotoParams, q: &[f64; NDOF], qd: &[f64; NDOF]) -> LocalHub {
    let (s, tau) = (q[FORK], q[DEFLECTION]);
    let (sd, taud) = (qd[FORK], qd[DEFLECTION]);
    let d = [p.fork_rake.sin(), -p.fork_rake.cos()];
    let e = rot(tau.cos(), -tau.sin(), d);
    let arm = p.fork_length - s;
    let h = add(p.steering_head, scale(arm, e));
    let h_s = scale(-1.0, e);
    let h_tau = scale(-arm, perp(e));
    let h_s_tau = perp(e);
    let h_tau_tau = scale(-arm, e);
    let quad = add(scale(2.0 * sd * taud, h_s_tau), scale(taud * taud, h_tau_tau));
    let hdot = add(scale(sd, h_s), scale(taud, h_tau));
    LocalHub {
        h,
        first: [(FORK, h_s), (DEFLECTION, h_tau)],
        quad,
        hdot,
    }
}

fn rear_local(p: &MotoParams, q: &[f64; NDOF], qd: &[f64; NDOF]) -> LocalHub {
    let psi = p.swingarm_angle - q[SWING];
    let (sp, cp) = psi.sin_cos();
    let l = p.swingarm_length;
    let h = add(p.swingarm_pivot, [-l * cp, -l * sp]);
    let h_sw = [-l * sp, l * cp];
    let h_sw_sw = [l * cp, l * sp];
    let rate = qd[SWING];
    LocalHub {
        h,
        first: [(SWING, h_sw), (SWING, [0.0, 0.0])],
        quad: scale(rate * rate, h_sw_sw),
        hdot: scale(rate, h_sw),
    }
}

fn body_point(c: f64, s: f64, q: &[f64; NDOF], qd: &[f64; NDOF], local: LocalHub) -> PointKin {
    let th_d = qd[PITCH];
    let rh = rot(c, s, local.h);
    let pos = [q[X] + rh[0], q[Z] + rh[1]];
    let mut jac = [[0.0; NDOF]; 2];
    jac[0][X] = 1.0;
    jac[1][Z] = 1.0;
    let jt = perp(rh);
    jac[0][PITCH] = jt[0];
    jac[1][PITCH] = jt[1];
    for (k, dh) in local.first {
        let r = rot(c, s, dh);
        jac[0][k] += r[0];
        jac[1][k] += r[1];
    }
    let mut vel = [0.0; 2];
    for k in 0..NDOF {
        vel[0] += jac[0][k] * qd[k];
        vel[1] += jac[1][k] * qd[k];
    }
    let bias = add(
        add(scale(-th_d * th_d, rh), scale(2.0 * th_d, rot(c, s, perp(local.hdot)))),
        rot(c, s, local.quad),
    );
    PointKin { pos, vel, jac, bias }
}

fn frame_point(c: f64, s: f64, q: &[f64; NDOF], qd: &[f64; NDOF], local: V2) -> PointKin {
    body_point(
        c,
        s,
        q,
        qd,
        LocalHub {
            h: local,
            first: [(X, [0.0, 0.0]), (X, [0.0, 0.0])],
            quad: [0.0, 0.0],
            hdot: [0.0, 0.0],
        },
    )
}

fn kinematics(p: &MotoParams, q: &[f64; NDOF], qd: &[f64; NDOF]) -> Kinematics {
    let (s, c) = q[PITCH].sin_cos();
    Kinematics {
        front_hub: body_point(c, s, q, qd, front_local(p, q, qd)),
        rear_hub: body_point(c, s, q, qd, rear_local(p, q, qd)),
        cos: c,
        sin: s,
    }
}

/// Top-view footprint of the motorcycle in state `state`.
pub fn geometry(p: &MotoParams, state: &MotoState) -> MotoGeometry {
    let k = kinematics(p, &state.q, &state.qd);
    part_boxes(p, &state.q, &k)
}

fn part_boxes(p: &MotoParams, q: &[f64; NDOF], k: &Kinematics) -> MotoGeometry {
    let fx = k.front_hub.pos[0];
    let rx = k.rear_hub.pos[0];
    let along = |u: f64| q[X] + u * k.cos;
    let head = along(p.handlebar_u);
    MotoGeometry {
        parts: vec![
            PartBox {
                part: MotoPart::FrontWheel,
                x_min: fx - p.front_wheel_radius,
                x_max: fx + p.front_wheel_radius,
                half_width: p.front_tire_half_width,
            },
            PartBox {
                part: MotoPart::RearWheel,
                x_min: rx - p.rear_wheel_radius,
                x_max: rx + p.rear_wheel_radius,
                half_width: p.rear_tire_half_width,
            },
            PartBox {
                part: MotoPart::Body,
                x_min: along(p.body_extent[0]),
                x_max: along(p.body_extent[1]),
                half_width: p.body_half_width,
            },
            PartBox {
                part: MotoPart::Handlebar,
                x_min: head - 0.06,
                x_max: head + 0.06,
                half_width: p.handlebar_half_width,
            },
        ],
    }
}

fn mass_matrix(p: &MotoParams, k: &Kinematics) -> Mat {
    let mut m = Mat::zeros();
    m[(X, X)] += p.frame_mass;
    m[(Z, Z)] += p.frame_mass;
    m[(PITCH, PITCH)] += p.frame_pitch_inertia;
    m[(FRONT_SPIN, FRONT_SPIN)] += p.front_wheel_inertia;
    m[(REAR_SPIN, REAR_SPIN)] += p.rear_wheel_inertia;
    for (hub, mass) in [
        (&k.front_hub, p.front_wheel_mass),
        (&k.rear_hub, p.rear_wheel_mass),
    ] {
        for i in 0..NDOF {
            for j in 0..NDOF {
                m[(i, j)] +=
                    mass * (hub.jac[0][i] * hub.jac[0][j] + hub.jac[1][i] * hub.jac[1][j]);
            }
        }
    }
    m
}

/// Spring and bump-stop force on a suspension coordinate (generalized, restoring).
fn suspension_force(pos: f64, rate: f64, preload: f64, k: f64, c: f64, limits: [f64; 2], k_stop: f64) -> f64 {
    let mut f = -(preload + k * pos + c * rate);
    if pos > limits[1] {
        f -= k_stop * (pos - limits[1]);
    } else if pos < limits[0] {
        f -= k_stop * (pos - limits[0]);
    }
    f
}

struct TireLoad {
    normal: f64,
    force: V2,
    spin_torque: f64,
}

fn tire_road(p: &MotoParams, road: &RoadProfile, hub: &PointKin, radius: f64, spin_rate: f64) -> TireLoad {
    let (zr, slope) = road.height_slope(hub.pos[0]);
    let a = slope.atan();
    let (sa, ca) = a.sin_cos();
    let n = [-sa, ca];
    let t = [ca, sa];
    let dist = (hub.pos[1] - zr) * ca;
    let pen = radius - dist;
    if pen <= 0.0 {
        return TireLoad {
            normal: 0.0,
            force: [0.0, 0.0],
            spin_torque: 0.0,
        };
    }
    let pen_rate = -dot(hub.vel, n);
    let normal = (p.tire_stiffness * pen + p.tire_damping * pen_rate).max(0.0);
    let slip = dot(hub.vel, t) - radius * spin_rate;
    let friction = -p.tire_friction * normal * (slip / p.tire_slip_scale).tanh();
    TireLoad {
        normal,
        force: add(scale(normal, n), scale(friction, t)),
        spin_torque: -radius * friction,
    }
}

struct Forces {
    rhs: Vec8,
    loads: ContactLoads,
    /// Force on the car from the motorcycle, top view.
    car_reaction: V2,
}

fn generalized_forces(
    p: &MotoParams,
    q: &[f64; NDOF],
    qd: &[f64; NDOF],
    controls: &Controls,
    env: &Environment,
    k: &Kinematics,
) -> Forces {
    let mut rhs = Vec8::zeros();
    let g = p.gravity;
    rhs[Z] -= p.frame_mass * g;
    k.front_hub.apply([0.0, -p.front_wheel_mass * g], &mut rhs);
    k.rear_hub.apply([0.0, -p.rear_wheel_mass * g], &mut rhs);

    // velocity-product terms moved to the right-hand side
    k.front_hub.apply(scale(-p.front_wheel_mass, k.front_hub.bias), &mut rhs);
    k.rear_hub.apply(scale(-p.rear_wheel_mass, k.rear_hub.bias), &mut rhs);

    rhs[FORK] += suspension_force(
        q[FORK],
        qd[FORK],
        p.front_susp_preload,
        p.front_susp_stiffness,
        p.front_susp_damping,
        p.front_travel,
        p.bump_stop_stiffness,
    );
    rhs[SWING] += suspension_force(
        q[SWING],
        qd[SWING],
        p.rear_swing_preload,
        p.rear_swing_stiffness,
        p.rear_swing_damping,
        p.rear_travel,
        p.bump_stop_stiffness,
    );

    let mut loads = ContactLoads::default();
    for (idx, hub, radius, spin) in [
        (0usize, &k.front_hub, p.front_wheel_radius, FRONT_SPIN),
        (1, &k.rear_hub, p.rear_wheel_radius, REAR_SPIN),
    ] {
        let tire = tire_road(p, &env.road, hub, radius, qd[spin]);
        hub.apply(tire.force, &mut rhs);
        rhs[spin] += tire.spin_torque;
        loads.road_normal[idx] = tire.normal;
    }

    let relative_spin = |spin: usize| qd[spin] + qd[PITCH];
    for (spin, brake) in [(FRONT_SPIN, controls.brake_front), (REAR_SPIN, controls.brake_rear)] {
        if brake != 0.0 {
            let t = -brake * (relative_spin(spin) / p.brake_spin_scale).tanh();
            rhs[spin] += t;
            rhs[PITCH] += t;
        }
    }
    rhs[REAR_SPIN] += controls.drive_rear;
    rhs[PITCH] += controls.drive_rear;

    let mut car_reaction = [0.0, 0.0];
    if let Some(car) = &env.car {
        let geo = part_boxes(p, q, k);
        for contact in geo.contacts(car) {
            let part_idx = MotoPart::ALL.iter().position(|&m| m == contact.part).unwrap_or(0);
            let point = match contact.part {
                MotoPart::FrontWheel => k.front_hub,
                MotoPart::RearWheel => k.rear_hub,
                MotoPart::Body | MotoPart::Handlebar => {
                    let u = (contact.point[0] - q[X]) / k.cos;
                    frame_point(k.cos, k.sin, q, qd, [u, p.body_contact_height])
                }
            };
            let rel = [point.vel[0] - car.velocity[0], -car.velocity[1]];
            let pen_rate = -dot(rel, contact.normal);
            let mag = if contact.part == MotoPart::Handlebar {
                (p.handlebar_contact_stiffness * contact.depth + car.damping * pen_rate)
                    .clamp(0.0, p.handlebar_breakaway_force)
            } else {
                (car.stiffness * contact.depth + car.damping * pen_rate).max(0.0)
            };
            if mag == 0.0 {
                continue;
            }
            let f = scale(mag, contact.normal);
            point.apply([f[0], 0.0], &mut rhs);
            car_reaction = add(car_reaction, scale(-1.0, f));
            loads.car_on_part[part_idx] += mag;
            match contact.part {
                MotoPart::FrontWheel => loads.car_on_wheel[0] += mag,
                MotoPart::RearWheel => loads.car_on_wheel[1] += mag,
                MotoPart::Body => match contact::side_of(contact.point) {
                    Side::Left => loads.sensor_left = true,
                    Side::Right => loads.sensor_right = true,
                },
                MotoPart::Handlebar => {}
            }
        }
    }
    Forces {
        rhs,
        loads,
        car_reaction,
    }
}

fn solve(m: &Mat, rhs: &Vec8, time: f64) -> Result<Vec8> {
    m.cholesky().map(|ch| ch.solve(rhs)).ok_or(Error::Integration {
        time,
        channel: "mass_matrix",
    })
}

/// Accelerations with the deflection joint either locked or flowing plastically.
/// Returns the accelerations and whether the joint flows.
fn accelerations(p: &MotoParams, state: &MotoState, m: &Mat, mut rhs: Vec8, time: f64) -> Result<(Vec8, bool)> {
    let tau = state.q[DEFLECTION];
    let resistance = p.deflection_yield_torque + p.deflection_stiffness * tau;
    if state.deflecting {
        rhs[DEFLECTION] -= resistance + p.deflection_damping * state.qd[DEFLECTION];
        return Ok((solve(m, &rhs, time)?, true));
    }
    let mut locked = *m;
    let mut locked_rhs = rhs;
    for j in 0..NDOF {
        locked[(DEFLECTION, j)] = 0.0;
        locked[(j, DEFLECTION)] = 0.0;
    }
    locked[(DEFLECTION, DEFLECTION)] = 1.0;
    locked_rhs[DEFLECTION] = 0.0;
    let acc = solve(&locked, &locked_rhs, time)?;
    // joint torque needed to hold the fork; the inward load is its negative
    let hold = (m.row(DEFLECTION) * acc)[0] - rhs[DEFLECTION];
    if -hold > resistance {
        rhs[DEFLECTION] -= resistance;
        return Ok((solve(m, &rhs, time)?, true));
    }
    Ok((acc, false))
}

/// Advances the motorcycle (and the car, if present) by one step of length `dt`.
pub fn step(
    params: &MotoParams,
    state: &MotoState,
    controls: &Controls,
    env: &mut Environment,
    dt: f64,
    time: f64,
) -> Result<StepOutcome> {
    if !(dt > 0.0 && dt <= 1e-3) {
        return Err(Error::validation(format!("step size {dt} outside (0, 1e-3]")));
    }
    state.check_finite(time)?;
    let k = kinematics(params, &state.q, &state.qd);
    let m = mass_matrix(params, &k);
    let forces = generalized_forces(params, &state.q, &state.qd, controls, env, &k);
    let (acc, flowing) = accelerations(params, state, &m, forces.rhs, time)?;

    let mut next = state.clone();
    next.deflecting = flowing;
    for i in 0..NDOF {
        next.qd[i] += dt * acc[i];
    }
    if next.deflecting && next.qd[DEFLECTION] <= 0.0 {
        next.qd[DEFLECTION] = 0.0;
        next.deflecting = false;
    }
    if !next.deflecting {
        next.qd[DEFLECTION] = 0.0;
    }
    for i in 0..NDOF {
        next.q[i] += dt * next.qd[i];
    }
    next.check_finite(time + dt)?;

    if let Some(car) = env.car.as_mut() {
        let moto_mass = params.total_mass();
        let lateral_mass = car.mass * moto_mass / (car.mass + moto_mass);
        car.velocity[0] += dt * forces.car_reaction[0] / car.mass;
        car.velocity[1] += dt * forces.car_reaction[1] / lateral_mass;
        car.position[0] += dt * car.velocity[0];
        car.position[1] += dt * car.velocity[1];
    }

    let mut accel = [0.0; NDOF];
    accel.copy_from_slice(acc.as_slice());
    Ok(StepOutcome {
        state: next,
        accel,
        loads: forces.loads,
    })
}

/// Kinetic plus gravitational plus elastic energy, excluding the car.
pub fn mechanical_energy(p: &MotoParams, state: &MotoState, road: &RoadProfile) -> f64 {
    let k = kinematics(p, &state.q, &state.qd);
    let m = mass_matrix(p, &k);
    let v = Vec8::from_column_slice(&state.qd);
    let kinetic = 0.5 * (v.transpose() * m * v)[0];
    let g = p.gravity;
    let potential = g
        * (p.frame_mass * state.q[Z]
            + p.front_wheel_mass * k.front_hub.pos[1]
            + p.rear_wheel_mass * k.rear_hub.pos[1]);
    let spring = |pos: f64, pre: f64, stiff: f64, lim: [f64; 2]| {
        let mut e = pre * pos + 0.5 * stiff * pos * pos;
        let over = (pos - lim[1]).max(0.0) + (pos - lim[0]).min(0.0);
        e += 0.5 * p.bump_stop_stiffness * over * over;
        e
    };
    let elastic = spring(state.q[FORK], p.front_susp_preload, p.front_susp_stiffness, p.front_travel)
        + spring(state.q[SWING], p.rear_swing_preload, p.rear_swing_stiffness, p.rear_travel);
    let tire = |hub: &PointKin, radius: f64| {
        let (zr, slope) = road.height_slope(hub.pos[0]);
        let pen = radius - (hub.pos[1] - zr) * slope.atan().cos();
        if pen > 0.0 {
            0.5 * p.tire_stiffness * pen * pen
        } else {
            0.0
        }
    };
    kinetic
        + potential
        + elastic
        + tire(&k.front_hub, p.front_wheel_radius)
        + tire(&k.rear_hub, p.rear_wheel_radius)
}

/// Resting state on flat ground with the frame CG at `x`, found by Newton
/// iteration on the generalized forces of height, pitch and both suspensions.
pub fn static_equilibrium(p: &MotoParams, x: f64, ground: f64) -> Result<MotoState> {
    p.validate()?;
    let env = Environment {
        road: RoadProfile::flat(),
        car: None,
    };
    let free = [Z, PITCH, FORK, SWING];
    let mut state = MotoState {
        q: [0.0; NDOF],
        qd: [0.0; NDOF],
        deflecting: false,
    };
    // start with the hubs one radius above the ground
    state.q[Z] = p.front_wheel_radius - front_local(p, &state.q, &state.qd).h[1];
    let residual = |s: &MotoState| {
        let k = kinematics(p, &s.q, &s.qd);
        let f = generalized_forces(p, &s.q, &s.qd, &Controls::default(), &env, &k);
        free.map(|i| f.rhs[i])
    };
    for _ in 0..100 {
        let r = residual(&state);
        let norm = r.iter().map(|v| v.abs()).fold(0.0, f64::max);
        if norm < 1e-9 {
            state.q[X] = x;
            state.q[Z] += ground;
            return Ok(state);
        }
        let mut jac = SMatrix::<f64, 4, 4>::zeros();
        for (col, &i) in free.iter().enumerate() {
            let h = 1e-7;
            let mut plus = state.clone();
            plus.q[i] += h;
            let mut minus = state.clone();
            minus.q[i] -= h;
            let (rp, rm) = (residual(&plus), residual(&minus));
            for row in 0..4 {
                jac[(row, col)] = (rp[row] - rm[row]) / (2.0 * h);
            }
        }
        let delta = jac
            .lu()
            .solve(&SVector::<f64, 4>::from_column_slice(&r))
            .ok_or_else(|| Error::validation("singular equilibrium Jacobian"))?;
        for (col, &i) in free.iter().enumerate() {
            state.q[i] -= delta[col];
        }
    }
    Err(Error::validation("static equilibrium did not converge"))
}

/// One recorded integrator sample.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySample {
    pub time: f64,
    pub q: [f64; NDOF],
    pub qd: [f64; NDOF],
    pub qdd: [f64; NDOF],
    pub loads: ContactLoads,
}

/// Sampled simulation history of one scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub scenario_id: String,
    pub set: SetId,
    pub dt: f64,
    pub samples: Vec<TrajectorySample>,
    /// Contact onsets in time order.
    pub events: Vec<ContactEvent>,
}

impl Trajectory {
    /// Time of the first motorcycle-car contact.
    pub fn first_car_contact(&self) -> Option<f64> {
        self.events
            .iter()
            .find(|e| matches!(e.bodies, BodyPair::MotoCar(_)))
            .map(|e| e.time)
    }

    pub fn duration(&self) -> f64 {
        match (self.samples.first(), self.samples.last()) {
            (Some(a), Some(b)) => b.time - a.time,
            _ => 0.0,
        }
    }
}

/// Everything needed to run one simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct SimSetup {
    pub env: Environment,
    /// Initial frame CG position along the road (m).
    pub start_x: f64,
    pub speed: f64,
    pub controls: Controls,
    /// Maximum simulated time (s).
    pub horizon: f64,
    /// Stop this long after the first car contact (s).
    pub post_contact: Option<f64>,
    pub dt: f64,
}

/// Runs `setup` from static equilibrium to the horizon.
pub fn run_setup(id: &str, set: SetId, setup: SimSetup, params: &MotoParams) -> Result<Trajectory> {
    let run = || -> Result<Trajectory> {
        if let Some(car) = &setup.env.car {
            car.validate()?;
        }
        let ground = setup.env.road.height(setup.start_x);
        let mut state = static_equilibrium(params, setup.start_x, ground)?;
        state.qd[X] = setup.speed;
        state.qd[FRONT_SPIN] = setup.speed / params.front_wheel_radius;
        state.qd[REAR_SPIN] = setup.speed / params.rear_wheel_radius;

        let mut env = setup.env;
        let steps = (setup.horizon / setup.dt).round() as usize;
        let mut samples = Vec::with_capacity(steps + 1);
        let mut events = Vec::new();
        let mut in_contact = [false; 6];
        let mut stop_at = usize::MAX;
        for i in 0..=steps {
            let time = i as f64 * setup.dt;
            let out = step(params, &state, &setup.controls, &mut env, setup.dt, time)?;
            let loads = out.loads;
            let mut touching = [false; 6];
            touching[..4].copy_from_slice(&loads.car_on_part.map(|f| f > 0.0));
            touching[4] = loads.road_normal[0] > 0.0;
            touching[5] = loads.road_normal[1] > 0.0;
            for (j, (&now, was)) in touching.iter().zip(in_contact.iter_mut()).enumerate() {
                if now && !*was {
                    let (bodies, force, side) = match j {
                        0..=3 => {
                            let part = MotoPart::ALL[j];
                            let side = (part == MotoPart::Body).then(|| {
                                if loads.sensor_left {
                                    Side::Left
                                } else {
                                    Side::Right
                                }
                            });
                            (BodyPair::MotoCar(part), loads.car_on_part[j], side)
                        }
                        4 => (BodyPair::FrontWheelRoad, loads.road_normal[0], None),
                        _ => (BodyPair::RearWheelRoad, loads.road_normal[1], None),
                    };
                    if j < 4 && stop_at == usize::MAX {
                        if let Some(post) = setup.post_contact {
                            stop_at = i + (post / setup.dt).round() as usize;
                        }
                    }
                    events.push(ContactEvent {
                        time,
                        bodies,
                        normal_force: force,
                        side,
                    });
                }
                *was = now;
            }
            samples.push(TrajectorySample {
                time,
                q: state.q,
                qd: state.qd,
                qdd: out.accel,
                loads,
            });
            if i >= stop_at {
                break;
            }
            state = out.state;
        }
        Ok(Trajectory {
            scenario_id: id.to_string(),
            set,
            dt: setup.dt,
            samples,
            events,
        })
    };
    run().map_err(|e| e.in_scenario(id))
}

/// Simulates one scenario. Deterministic in the spec (including its seed).
pub fn simulate(spec: &ScenarioSpec, params: &MotoParams) -> Result<Trajectory> {
    let setup = spec.setup(params).map_err(|e| e.in_scenario(&spec.id))?;
    run_setup(&spec.id, spec.set, setup, params)
}

#[cfg(test)]
mod tests;
