use motocrash_web::*;

#[test]
fn lhs_design_has_one_point_per_stratum() {
    for set in ["A.1", "B.1", "B.2"] {
        let d = lhs_dimensions(set).unwrap().len();
        let n = 25;
        let pts = lhs_design(set, n, 3).unwrap();
        assert_eq!(pts.len(), n as usize * d);
        for j in 0..d {
            let mut strata: Vec<usize> = (0..n as usize)
                .map(|i| ((pts[i * d + j] * n as f64).floor() as usize).min(n as usize - 1))
                .collect();
            strata.sort_unstable();
            assert_eq!(strata, (0..n as usize).collect::<Vec<_>>(), "{set} dim {j}");
        }
    }
}

#[test]
fn roads_match_requested_shape() {
    let flat = road_sine(0.0, 0.0, 0.0, 1).unwrap();
    assert!(flat.iter().all(|&h| h == 0.0));
    let noisy = road_sine(2.0, 90.0, 0.02, 1).unwrap();
    assert_eq!(noisy.len(), flat.len());
    for kind in obstacle_kinds() {
        let r = obstacle_size_range(&kind).unwrap();
        let h = road_obstacle(&kind, r[1]).unwrap();
        let peak = h.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        // stepped obstacles drop by whole multiples of the step height
        let steps = (peak / r[1]).round();
        assert!(steps >= 1.0 && (peak - steps * r[1]).abs() < 1e-9, "{kind}: {peak}");
    }
    assert!(road_spacing() > 0.0);
}

#[test]
fn crash_traces_latch_after_contact() {
    let t = crash_traces(10.0, 90.0, 0.0, 1000.0).unwrap();
    let times = t.times();
    let labels = t.labels();
    assert_eq!(times.len(), labels.len());
    assert_eq!(channel_labels().len(), 23);
    assert_eq!(t.channel(13).len(), times.len());
    assert!(t.channel(99).is_empty());
    let c = t.contact_time();
    assert!(c.is_finite());
    for (time, l) in times.iter().zip(&labels) {
        assert_eq!(*l == 1, *time >= c);
    }
    assert!((times[1] - times[0] - 1e-3).abs() < 1e-12);
}
