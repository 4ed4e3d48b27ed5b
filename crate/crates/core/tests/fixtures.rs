use std::path::PathBuf;

use serde_json::json;
use smetric_lab::harness::{load_experiment, parse_experiment, run, LoadOptions, RunStatus, Verdict};
use smetric_lab::{Error, Point, Universe};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

#[test]
fn finite_example_loads() {
    let exp = load_experiment(fixture("step_map.json")).unwrap();
    assert_eq!(exp.space.points().len(), 4);
    let p = exp.params.unwrap();
    assert_eq!((p.a, p.b, p.c), (0.75, 0.0, 0.0));
    assert!(exp.phi.is_some() && exp.delta.is_some());
}

#[test]
fn grid_example_loads() {
    let exp = load_experiment(fixture("grid_circle.json")).unwrap();
    match exp.space.universe() {
        Universe::Grid(g) => assert_eq!((g.lo(), g.hi(), g.values().len()), (-10.0, 10.0, 2001)),
        other => panic!("{other:?}"),
    }
    let p = exp.params.unwrap();
    assert_eq!((p.a, p.b), (0.5, 0.0));
}

#[test]
fn finite_example_report() {
    let rep = run(&load_experiment(fixture("step_map.json")).unwrap());
    assert_eq!(rep.status, RunStatus::Fail);
    let ii: Vec<_> = rep.checks.iter().filter(|c| c.check == "condition_ii").collect();
    assert_eq!(ii.len(), 2);
    assert_eq!(ii[0].verdict, Verdict::Fail);
    assert_eq!(ii[1].verdict, Verdict::Pass);
    let shown = ii[0].summary["violations"]["shown"].as_array().unwrap();
    assert!(shown.iter().any(|v| v["x"] == "4" && v["y"] == "8" && v["epsilon"] == json!(3.5)));
    assert_eq!(rep.record("condition_i").unwrap().verdict, Verdict::Pass);
    assert_eq!(rep.record("solve").unwrap().summary["fixed_points"], json!(["4"]));
    assert_eq!(rep.record("fix_set").unwrap().verdict, Verdict::Pass);
    assert_eq!(rep.record("descent").unwrap().verdict, Verdict::Pass);
    assert_eq!(rep.record("solve_power").unwrap().verdict, Verdict::Pass);
    assert_eq!(rep.checks.len(), rep.experiment.resolved.checks.len());
}

#[test]
fn grid_example_report() {
    let rep = run(&load_experiment(fixture("grid_circle.json")).unwrap());
    assert_eq!(rep.status, RunStatus::Pass, "{rep:#?}");
    let rho = rep.record("rho").unwrap().summary["rho"].as_f64().unwrap();
    assert!((rho - 2.0).abs() <= 1e-12);
    assert_eq!(rep.record("circle").unwrap().summary["circle_points"], json!([-1.0, 1.0]));
    let fc = &rep.record("fixed_circle").unwrap().summary;
    assert_eq!(fc["fixed_verdict"]["circle_fixed"], true);
    assert_eq!(fc["fixed_verdict"]["disc_fixed"], true);
    assert_eq!(fc["disc_points"]["count"], 201);
    assert_eq!(fc["x0_fixed"], true);
}

#[test]
fn discontinuity_report() {
    let rep = run(&load_experiment(fixture("discontinuity_0_2.json")).unwrap());
    assert_eq!(rep.status, RunStatus::Pass);
    let d = &rep.record("discontinuity").unwrap().summary["verdict"];
    assert_eq!(d["classification"], "discontinuous_at_u");
    let limits = d["per_sequence_limits"].as_array().unwrap();
    assert!((limits[0]["estimate"].as_f64().unwrap() - 0.5).abs() <= 0.01);
    assert!(limits[1]["estimate"].as_f64().unwrap() <= 0.01);
    assert_eq!(rep.record("fix_set").unwrap().verdict, Verdict::Unsupported);
}

#[test]
fn every_check_kind_reports_once() {
    let text = std::fs::read_to_string(fixture("step_map.json")).unwrap();
    let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
    v["checks"] = json!([
        {"check": "axioms"}, {"check": "triangle"}, {"check": "generated"}, {"check": "phi_gauge", "t": [1, 2, 6]},
        {"check": "condition_i", "mode": "strict"}, {"check": "condition_i", "mode": "simple"},
        {"check": "condition_ii"}, {"check": "xi"}, {"check": "solve"}, {"check": "solve_power", "m": 2},
        {"check": "descent"}, {"check": "fix_set"}, {"check": "discontinuity", "u": "4"}, {"check": "rho"},
        {"check": "circle", "x0": "4"}, {"check": "zamfirescu", "x0": "4"}, {"check": "fixed_circle", "x0": "4"}
    ]);
    let exp = parse_experiment(&v.to_string(), LoadOptions::default()).unwrap();
    let rep = run(&exp);
    assert_eq!(rep.checks.len(), 17);
    assert!(rep.checks.iter().all(|c| c.verdict != Verdict::Aborted), "{rep:#?}");
    for (i, c) in rep.checks.iter().enumerate() {
        assert_eq!(c.index, i);
        assert_eq!(c.check, exp.checks[i].name());
    }
    let disc = &rep.record("discontinuity").unwrap();
    assert_eq!(disc.summary["verdict"]["classification"], "inconclusive");
    let fc = rep.record("fixed_circle").unwrap();
    assert_eq!(fc.verdict, Verdict::Fail);
    assert_eq!(fc.summary["circle_points"], json!(["2"]));
    assert_eq!(fc.summary["hypotheses"]["zamfirescu"], false);
    assert_eq!(fc.summary["inconsistency"], false);
}

#[test]
fn step_zero_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(
        &path,
        r#"{"space": {"kind": "real_grid", "lo": 0, "hi": 1, "step": 0},
            "smetric": {"kind": "formula", "expr": "abs(x-z)+abs(y-z)"}}"#,
    )
    .unwrap();
    match load_experiment(&path) {
        Err(Error::Config { path, .. }) => assert_eq!(path, "space.step"),
        other => panic!("{other:?}"),
    }
    assert!(matches!(load_experiment(dir.path().join("missing.json")), Err(Error::Io(_))));
}

#[test]
fn empty_check_list_gives_echo_only() {
    let text = r#"{"id": "bare", "space": {"kind": "finite", "points": [1, 2]},
                   "smetric": {"kind": "formula", "expr": "abs(x-z)+abs(y-z)"}}"#;
    let exp = parse_experiment(text, LoadOptions::default()).unwrap();
    let rep = run(&exp);
    assert!(rep.checks.is_empty());
    assert_eq!(rep.status, RunStatus::Pass);
    assert_eq!(rep.experiment.id.as_deref(), Some("bare"));
    assert_eq!(exp.space.points(), vec![Point::label("1"), Point::label("2")]);
    assert!(exp.checks.is_empty());
}
