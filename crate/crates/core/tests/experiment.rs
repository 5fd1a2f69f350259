use blotto_core::experiment::{csv_header, preset, run, to_csv, ExperimentSpec, RowStatus, PRESETS};

const SMALL: &str = r#"{
    "name": "small",
    "template": {
        "xA": {"param": "X"},
        "xB": 4,
        "alpha": 0.5,
        "battlefields": [
            {"w": 1, "p": {"param": "p"}, "q": 1},
            {"w": 2, "p": {"param": "p", "scale": -1}, "q": 1},
            {"w": 1, "p": 0, "q": {"param": "X", "pow": -1}}
        ]
    },
    "sweeps": [
        {"param": "X", "values": [2, 4]},
        {"param": "p", "range": {"start": -0.5, "stop": 0.5, "step": 0.25}}
    ],
    "delta": 1e-8
}"#;

#[test]
fn points_are_crossed_first_sweep_slowest() {
    let spec = ExperimentSpec::from_json(SMALL).unwrap();
    let pts = spec.points().unwrap();
    assert_eq!(pts.len(), 10);
    assert_eq!(pts[0], vec![2.0, -0.5]);
    assert_eq!(pts[4], vec![2.0, 0.5]);
    assert_eq!(pts[5], vec![4.0, -0.5]);
    let g = spec.instantiate(&[4.0, 0.25]).unwrap();
    assert_eq!(g.n(), 3);
}

#[test]
fn csv_is_deterministic_and_well_formed() {
    let spec = ExperimentSpec::from_json(SMALL).unwrap();
    let a = to_csv(&spec, &run(&spec, None).unwrap());
    let b = to_csv(&spec, &run(&spec, None).unwrap());
    assert_eq!(a, b);
    let lines: Vec<&str> = a.lines().collect();
    assert_eq!(lines.len(), 11);
    let header = csv_header(&spec);
    assert_eq!(lines[0], header.join(","));
    assert_eq!(header.first().map(String::as_str), Some("X"));
    assert_eq!(header.last().map(String::as_str), Some("status"));
    for l in &lines[1..] {
        assert_eq!(l.split(',').count(), header.len(), "{l}");
    }
    assert!(!a.contains('\r'));
}

#[test]
fn solved_rows_carry_consistent_payoffs() {
    let spec = ExperimentSpec::from_json(SMALL).unwrap();
    for (pt, row) in run(&spec, None).unwrap() {
        let g = spec.instantiate(&pt).unwrap();
        match row.status {
            RowStatus::Solved | RowStatus::TrivialGame => {
                let (pa, pb) = (row.pi_a.unwrap(), row.pi_b.unwrap());
                assert!((pa + pb - g.total_value()).abs() < 1e-9, "{pt:?}");
                assert_eq!(row.classes.len(), 3);
            }
            other => panic!("{pt:?}: unexpected {other:?}"),
        }
    }
}

#[test]
fn bad_specs_are_rejected() {
    let dup = SMALL.replace(r#"{"param": "p", "range""#, r#"{"param": "X", "range""#);
    assert!(ExperimentSpec::from_json(&dup).is_err());
    let bad_step = SMALL.replace(r#""step": 0.25"#, r#""step": -0.25"#);
    assert!(ExperimentSpec::from_json(&bad_step).is_err());
    assert!(ExperimentSpec::from_json(&SMALL.replace(r#""delta": 1e-8"#, r#""delta": 0"#)).is_err());
    assert!(ExperimentSpec::from_json("{}").is_err());
}

#[test]
fn presets_exist_and_validate() {
    for name in PRESETS {
        let spec = preset(name).unwrap();
        spec.validate().unwrap();
        assert_eq!(spec.n(), 4);
        let back = ExperimentSpec::from_json(&serde_json::to_string(&spec).unwrap()).unwrap();
        assert_eq!(back, spec);
    }
    assert!(preset("fig9").is_none());
}

#[test]
fn preallocation_zero_is_the_symmetric_game() {
    for name in ["fig5-spread", "fig5-focus"] {
        let mut spec = preset(name).unwrap();
        spec.sweeps[0] = blotto_core::experiment::Sweep::values("P", vec![0.0]);
        let rows = run(&spec, Some(1e-9)).unwrap();
        assert_eq!(rows[0].1.status, RowStatus::Solved);
        assert!((rows[0].1.pi_a.unwrap() - 4.0).abs() < 1e-6);
    }
}
