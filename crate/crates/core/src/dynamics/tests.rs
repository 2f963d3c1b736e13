use super::*;
use crate::scenario::{build_crash_b1, build_obstacle_a2, ObstacleKind};

fn flat_env() -> Environment {
    Environment {
        road: RoadProfile::flat(),
        car: None,
    }
}

fn run(p: &MotoParams, mut state: MotoState, controls: Controls, env: &mut Environment, dt: f64, t: f64) -> MotoState {
    let n = (t / dt).round() as usize;
    for i in 0..n {
        state = step(p, &state, &controls, env, dt, i as f64 * dt).unwrap().state;
    }
    state
}

#[test]
fn rests_in_equilibrium() {
    let p = MotoParams::default();
    let rest = static_equilibrium(&p, 0.0, 0.0).unwrap();
    let end = run(&p, rest.clone(), Controls::default(), &mut flat_env(), DEFAULT_DT, 1.0);
    for k in 0..NDOF {
        assert!((end.q[k] - rest.q[k]).abs() < 1e-6, "{} drifted", DOF_NAMES[k]);
        assert!(end.qd[k].abs() < 1e-6);
    }
    // suspensions sit inside their travel
    assert!(rest.fork_travel() > p.front_travel[0] && rest.fork_travel() < p.front_travel[1]);
    assert!(rest.rear_swing() > p.rear_travel[0] && rest.rear_swing() < p.rear_travel[1]);
}

#[test]
fn equilibrium_follows_ground_height() {
    let p = MotoParams::default();
    let a = static_equilibrium(&p, 2.0, 0.0).unwrap();
    let b = static_equilibrium(&p, 2.0, 1.5).unwrap();
    assert!((b.z() - a.z() - 1.5).abs() < 1e-12);
    assert_eq!(a.x(), 2.0);
}

#[test]
fn wheel_loads_balance_weight() {
    let p = MotoParams::default();
    let rest = static_equilibrium(&p, 0.0, 0.0).unwrap();
    let out = step(&p, &rest, &Controls::default(), &mut flat_env(), DEFAULT_DT, 0.0).unwrap();
    let total: f64 = out.loads.road_normal.iter().sum();
    assert!((total - p.total_mass() * p.gravity).abs() < 1e-3 * total);
    assert!(out.loads.road_normal.iter().all(|&n| n > 0.0));
}

#[test]
fn braking_slows_bike_and_wheels() {
    let p = MotoParams::default();
    let mut s = static_equilibrium(&p, 0.0, 0.0).unwrap();
    s.qd[X] = 10.0;
    s.qd[FRONT_SPIN] = 10.0 / p.front_wheel_radius;
    s.qd[REAR_SPIN] = 10.0 / p.rear_wheel_radius;
    let c = Controls::from_signed_torque(-400.0);
    assert!((c.brake_front - 280.0).abs() < 1e-12 && (c.brake_rear - 120.0).abs() < 1e-12);
    let end = run(&p, s.clone(), c, &mut flat_env(), DEFAULT_DT, 0.5);
    assert!(end.speed() < s.speed() - 0.5);
    assert!(end.qd[FRONT_SPIN] < s.qd[FRONT_SPIN]);
    assert!(end.qd[REAR_SPIN] < s.qd[REAR_SPIN]);
    // braking loads the fork
    assert!(end.fork_travel() > s.fork_travel());
}

#[test]
fn drive_torque_accelerates() {
    let p = MotoParams::default();
    let mut s = static_equilibrium(&p, 0.0, 0.0).unwrap();
    s.qd[X] = 5.0;
    s.qd[FRONT_SPIN] = 5.0 / p.front_wheel_radius;
    s.qd[REAR_SPIN] = 5.0 / p.rear_wheel_radius;
    let end = run(&p, s, Controls::from_signed_torque(300.0), &mut flat_env(), DEFAULT_DT, 0.5);
    assert!(end.speed() > 5.3);
}

#[test]
fn energy_matches_fine_step_reference() {
    // dropped from 3 cm above rest while rolling; compare against dt/100
    let p = MotoParams::default();
    let mut s = static_equilibrium(&p, 0.0, 0.0).unwrap();
    s.q[Z] += 0.03;
    s.qd[X] = 5.0;
    s.qd[FRONT_SPIN] = 5.0 / p.front_wheel_radius;
    s.qd[REAR_SPIN] = 5.0 / p.rear_wheel_radius;
    let road = RoadProfile::flat();
    let t = 0.3;
    let coarse = run(&p, s.clone(), Controls::default(), &mut flat_env(), DEFAULT_DT, t);
    let fine = run(&p, s.clone(), Controls::default(), &mut flat_env(), DEFAULT_DT / 100.0, t);
    let e0 = mechanical_energy(&p, &s, &road);
    let ec = mechanical_energy(&p, &coarse, &road);
    let ef = mechanical_energy(&p, &fine, &road);
    // damping dissipates energy
    assert!(ef < e0);
    let kinetic = 0.5 * p.total_mass() * 25.0;
    assert!((ec - ef).abs() < 0.005 * kinetic, "coarse {ec} fine {ef}");
}

#[test]
fn integration_is_deterministic() {
    let p = MotoParams::default();
    let spec = build_crash_b1(9.0, 30.0, 0.4).unwrap();
    let a = simulate(&spec, &p).unwrap();
    let b = simulate(&spec, &p).unwrap();
    assert_eq!(a, b);
}

#[test]
fn rejects_bad_step() {
    let p = MotoParams::default();
    let s = static_equilibrium(&p, 0.0, 0.0).unwrap();
    assert!(step(&p, &s, &Controls::default(), &mut flat_env(), 0.0, 0.0).is_err());
    assert!(step(&p, &s, &Controls::default(), &mut flat_env(), 2e-3, 0.0).is_err());
    let mut bad = s.clone();
    bad.qd[Z] = f64::NAN;
    let err = step(&p, &bad, &Controls::default(), &mut flat_env(), DEFAULT_DT, 0.5).unwrap_err();
    assert!(matches!(err, Error::Integration { channel: "z", .. }));
}

#[test]
fn curb_at_top_speed_does_not_bend_fork() {
    let p = MotoParams::default();
    let setup = SimSetup {
        env: Environment {
            road: build_obstacle_a2(ObstacleKind::CurbUp, 0.12).unwrap(),
            car: None,
        },
        start_x: -4.0,
        speed: 23.0,
        controls: Controls::default(),
        horizon: 1.0,
        post_contact: None,
        dt: DEFAULT_DT,
    };
    let tr = run_setup("curb", SetId::A2, setup, &p).unwrap();
    assert!(tr.samples.iter().all(|s| s.q[DEFLECTION] == 0.0));
    assert!(tr.first_car_contact().is_none());
}

#[test]
fn head_on_contact_time_matches_gap() {
    let p = MotoParams::default();
    let spec = build_crash_b1(10.0, 0.0, 0.0).unwrap();
    let tr = simulate(&spec, &p).unwrap();
    let t = tr.first_car_contact().expect("contact");
    assert!((t - crate::scenario::PRE_CONTACT).abs() < 5e-3, "contact at {t}");
    assert_eq!(tr.events.iter().find(|e| matches!(e.bodies, BodyPair::MotoCar(_))).unwrap().bodies,
        BodyPair::MotoCar(MotoPart::FrontWheel));
    // the run stops shortly after contact
    assert!(tr.duration() < t + crate::scenario::POST_CONTACT + 1e-3);
    // a frontal impact at this speed bends the fork
    assert!(tr.samples.last().unwrap().q[DEFLECTION] > 0.0);
}

#[test]
fn grazing_contact_is_later_and_weaker() {
    let p = MotoParams::default();
    let head_on = simulate(&build_crash_b1(10.0, 0.0, 0.0).unwrap(), &p).unwrap();
    let graze = simulate(&build_crash_b1(10.0, 0.0, 1.2).unwrap(), &p).unwrap();
    let th = head_on.first_car_contact().unwrap();
    let tg = graze.first_car_contact().expect("grazing still touches");
    assert!(tg > th);
    let peak = |tr: &Trajectory| {
        tr.samples
            .iter()
            .map(|s| s.loads.car_on_part.iter().sum::<f64>())
            .fold(0.0, f64::max)
    };
    assert!(peak(&graze) < peak(&head_on));
    assert!(graze.samples.iter().all(|s| !s.loads.sensor_left && !s.loads.sensor_right));
}
