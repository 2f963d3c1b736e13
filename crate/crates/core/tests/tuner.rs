mod common;

use std::collections::{BTreeMap, BTreeSet};

use common::toy_dataset;
use motocrash::learners::ModelKind;
use motocrash::scenario::SetId;
use motocrash::telemetry::{FrameRecord, SignalDataset, Stream, N_CHANNELS};
use motocrash::tuner::{f1, fold_partition, grid_search, make_folds, stream_folds, Grid};
use proptest::prelude::*;

fn axes(pairs: &[(&str, &[f64])]) -> BTreeMap<String, Vec<f64>> {
    pairs.iter().map(|(k, v)| (k.to_string(), v.to_vec())).collect()
}

#[test]
fn f1_examples() {
    assert_eq!(f1(10, 0, 0), 1.0);
    assert_eq!(f1(5, 5, 5), 0.5);
    let (p, r) = (0.8, 8.0 / 12.0);
    assert!((f1(8, 2, 4) - 2.0 * p * r / (p + r)).abs() < 1e-12);
    assert!((f1(8, 2, 4) - 0.7273).abs() < 5e-5);
    assert_eq!(f1(0, 0, 3), 0.0);
    assert_eq!(f1(0, 3, 0), 0.0);
}

#[test]
fn forty_scenarios_fill_twenty_folds_in_pairs() {
    let ds = toy_dataset(20, 20, 4, 1.0, 0);
    let plan = make_folds(&ds, 20, 3).unwrap();
    let crash: BTreeSet<&str> = ds
        .streams
        .iter()
        .filter(|s| s.is_crash())
        .map(|s| s.scenario_id.as_str())
        .collect();
    for f in 0..20 {
        let m = plan.members(f);
        assert_eq!(m.len(), 2);
        assert_eq!(m.iter().filter(|id| crash.contains(**id)).count(), 1);
    }
    assert_eq!(plan.folds.len(), 40);
    assert!(make_folds(&toy_dataset(5, 5, 4, 1.0, 0), 20, 0).is_err());
}

#[test]
fn single_cell_grid_returns_that_cell() {
    let ds = toy_dataset(6, 6, 40, 3.0, 1);
    let plan = make_folds(&ds, 4, 0).unwrap();
    let grid = Grid::new(axes(&[
        ("n_estimators", &[5.0]),
        ("max_depth", &[2.0]),
        ("learning_rate", &[0.5]),
    ]));
    let r = grid_search(ModelKind::Adaboost, &grid, &ds, &plan, 0).unwrap();
    assert_eq!(r.table.len(), 1);
    assert_eq!(r.best, r.table[0].hyper);
    assert_eq!(r.best_score, r.table[0].mean_f1);
    assert_eq!(r.table[0].fold_f1.len(), 4);
}

/// Crash frames sit where channels 0 and 1 share a sign: stumps are additive
/// and cannot express that interaction, depth-2 trees can.
fn xor_dataset() -> SignalDataset {
    let base = toy_dataset(10, 10, 60, 0.0, 5);
    let streams = base
        .streams
        .into_iter()
        .map(|mut s| {
            let crash = s.is_crash();
            for f in s.frames.iter_mut() {
                let hit = f.features[0] * f.features[1] > 0.0;
                f.label = (crash && hit) as u8;
                if !crash && hit {
                    f.features[0] = -f.features[0];
                }
            }
            s
        })
        .collect();
    SignalDataset { streams }
}

#[test]
fn planted_depth_two_optimum_is_found() {
    let ds = xor_dataset();
    let plan = make_folds(&ds, 5, 0).unwrap();
    let grid = Grid::new(axes(&[
        ("n_estimators", &[10.0]),
        ("max_depth", &[1.0, 2.0]),
        ("learning_rate", &[0.5]),
    ]));
    let r = grid_search(ModelKind::Gboost, &grid, &ds, &plan, 0).unwrap();
    assert_eq!(r.best["max_depth"], 2.0);
    for c in &r.table {
        assert!(c.mean_f1 <= r.best_score);
    }
}

#[test]
fn ties_go_to_the_cheaper_model() {
    let ds = toy_dataset(6, 6, 30, 50.0, 2);
    let plan = make_folds(&ds, 3, 0).unwrap();
    let grid = Grid::new(axes(&[
        ("n_estimators", &[5.0, 10.0, 20.0]),
        ("max_depth", &[1.0]),
        ("learning_rate", &[0.5]),
    ]));
    let r = grid_search(ModelKind::Adaboost, &grid, &ds, &plan, 0).unwrap();
    assert!(r.table.iter().all(|c| c.mean_f1 == 1.0));
    assert_eq!(r.best["n_estimators"], 5.0);
}

#[test]
fn failing_cells_score_zero_and_search_continues() {
    let ds = toy_dataset(6, 6, 30, 5.0, 2);
    let plan = make_folds(&ds, 3, 0).unwrap();
    let grid = Grid::new(axes(&[
        ("n_estimators", &[5.0]),
        ("max_depth", &[0.0, 1.0]),
        ("learning_rate", &[0.5]),
    ]));
    let r = grid_search(ModelKind::Adaboost, &grid, &ds, &plan, 0).unwrap();
    let bad = r.table.iter().find(|c| c.hyper["max_depth"] == 0.0).unwrap();
    assert!(bad.failed.is_some());
    assert_eq!(bad.mean_f1, 0.0);
    assert_eq!(r.best["max_depth"], 1.0);
    assert!(r.to_csv().lines().count() >= 3);
}

#[test]
fn refinement_narrows_around_incumbent() {
    let g = Grid::new(axes(&[("c", &[1.0, 10.0, 100.0, 1000.0]), ("n_estimators", &[1.0, 5.0, 9.0])]));
    let inc: BTreeMap<String, f64> = [("c".to_string(), 10.0), ("n_estimators".to_string(), 9.0)].into();
    let r = g.refine(&inc);
    let want = [1.0, 10f64.sqrt(), 10.0, 1000f64.sqrt(), 100.0];
    assert_eq!(r.axes["c"].len(), 5);
    for (a, b) in r.axes["c"].iter().zip(want) {
        assert!((a - b).abs() < 1e-12);
    }
    assert_eq!(r.axes["n_estimators"], vec![5.0, 7.0, 9.0]);
    let r2 = r.refine(&inc);
    assert!(r2.axes["c"].last().unwrap() - r2.axes["c"][0] < 99.0);
}

#[test]
fn search_is_deterministic() {
    let ds = toy_dataset(6, 6, 30, 1.0, 4);
    let plan = make_folds(&ds, 3, 9).unwrap();
    let grid = Grid::new(axes(&[("n_estimators", &[3.0, 6.0]), ("max_depth", &[2.0, 4.0])]));
    let a = grid_search(ModelKind::Rforest, &grid, &ds, &plan, 1).unwrap();
    let b = grid_search(ModelKind::Rforest, &grid, &ds, &plan, 1).unwrap();
    assert_eq!(a, b);
}

/// Tags each frame with its stream index in channel 0 and checks no
/// validation scenario leaks into the training rows.
#[test]
fn folds_never_leak() {
    let mut ds = toy_dataset(8, 8, 10, 1.0, 0);
    for (g, s) in ds.streams.iter_mut().enumerate() {
        for f in s.frames.iter_mut() {
            f.features[0] = g as f64;
        }
    }
    let plan = make_folds(&ds, 4, 1).unwrap();
    let folds = stream_folds(&ds, &plan).unwrap();
    let data = ds.to_samples();
    for f in 0..4 {
        let (tr, va) = fold_partition(&data, &folds, f);
        let tags = |s: &motocrash::telemetry::Samples| -> BTreeSet<u64> {
            s.x.column(0).iter().map(|&v| v as u64).collect()
        };
        assert!(tags(&tr).is_disjoint(&tags(&va)));
        assert_eq!(tr.len() + va.len(), data.len());
    }
}

fn stream(id: usize, crash: bool) -> Stream {
    Stream {
        scenario_id: format!("s{id}"),
        set: if crash { SetId::B1 } else { SetId::A1 },
        category: None,
        frames: vec![FrameRecord {
            time: 0.0,
            features: [0.0; N_CHANNELS],
            label: crash as u8,
        }],
    }
}

proptest! {
    #[test]
    fn folds_partition_scenarios(n_crash in 1usize..30, n_ctrl in 1usize..30, k in 2usize..10, seed in 0u64..100) {
        let ds = SignalDataset {
            streams: (0..n_crash + n_ctrl).map(|i| stream(i, i < n_crash)).collect(),
        };
        match make_folds(&ds, k, seed) {
            Err(_) => prop_assert!(n_crash + n_ctrl < k),
            Ok(plan) => {
                prop_assert_eq!(plan.folds.len(), n_crash + n_ctrl);
                let sizes: Vec<usize> = (0..k).map(|f| plan.members(f).len()).collect();
                prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
                if n_crash >= k {
                    for f in 0..k {
                        let has_crash = plan
                            .members(f)
                            .iter()
                            .any(|id| id[1..].parse::<usize>().unwrap() < n_crash);
                        prop_assert!(has_crash);
                    }
                }
            }
        }
    }
}
