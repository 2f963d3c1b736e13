use std::collections::BTreeMap;

use motocrash::dynamics::MotoParams;
use motocrash::pipeline::{build_corpus, prepare, simulate_all};
use motocrash::scenario::{read_manifest, write_manifest, SetId};
use motocrash::telemetry::{read_dataset, write_dataset};

fn sizes(a1: usize, a2: usize, b1: usize, b2: usize, b3: usize) -> BTreeMap<SetId, usize> {
    [(SetId::A1, a1), (SetId::A2, a2), (SetId::B1, b1), (SetId::B2, b2), (SetId::B3, b3)].into()
}

#[test]
fn default_sizes_give_345() {
    let specs = build_corpus(&motocrash::pipeline::default_sizes(), 0).unwrap();
    assert_eq!(specs.len(), 345);
}

#[test]
fn classes_follow_sets() {
    let specs = build_corpus(&sizes(6, 5, 4, 4, 25), 3).unwrap();
    let ds = simulate_all(&specs, &MotoParams::default()).unwrap();
    for s in &ds.streams {
        if s.set.is_crash() {
            let c = s.contact_index().unwrap_or_else(|| panic!("{} never touched the car", s.scenario_id));
            assert!(s.frames[c..].iter().all(|f| f.label == 1), "{}", s.scenario_id);
            assert!(s.frames[..c].iter().all(|f| f.label == 0));
        } else {
            assert!(s.frames.iter().all(|f| f.label == 0), "{}", s.scenario_id);
        }
        assert_eq!(s.category.is_some(), s.set == SetId::B3);
        // 2 kHz grid
        let dt = s.frames[1].time - s.frames[0].time;
        assert!((dt - 5e-4).abs() < 1e-12);
    }
}

#[test]
fn simulation_is_deterministic_and_round_trips() {
    let specs = build_corpus(&sizes(2, 1, 2, 1, 0), 9).unwrap();
    let mut buf = Vec::new();
    write_manifest(&mut buf, &specs).unwrap();
    assert_eq!(read_manifest(buf.as_slice()).unwrap(), specs);

    let a = simulate_all(&specs, &MotoParams::default()).unwrap();
    let b = simulate_all(&specs, &MotoParams::default()).unwrap();
    assert_eq!(a, b);
    let mut csv = Vec::new();
    write_dataset(&mut csv, &a).unwrap();
    assert_eq!(read_dataset(csv.as_slice()).unwrap(), a);
}

#[test]
fn prepare_keeps_controls_full_rate() {
    let specs = build_corpus(&sizes(6, 2, 4, 4, 3), 1).unwrap();
    let ds = simulate_all(&specs, &MotoParams::default()).unwrap();
    let p = prepare(&ds, 0, 12).unwrap();
    for c in &p.controls.streams {
        let full = p.split.train.find(&c.scenario_id).unwrap();
        assert_eq!(c.frames.len(), full.frames.len());
        let sub = p.train.find(&c.scenario_id).unwrap();
        assert_eq!(sub.frames.len(), full.frames.len().div_ceil(12));
    }
    assert!(p.split.test.streams.iter().filter(|s| s.set == SetId::B3).count() == 3);
    assert!(p.controls.streams.iter().all(|s| !s.is_crash()));
}
