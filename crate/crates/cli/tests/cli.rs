use std::path::{Path, PathBuf};

use dimbound_cli::cli::run;
use dimbound_cli::error::CliError;
use dimbound_cli::spec::{parse_spec_str, Input};
use dimbound_cli::{parse_spec, run_pipeline};

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn invoke(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let mut argv = vec!["dimbound"];
    argv.extend_from_slice(args);
    let code = run(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn no_files(_: &str) -> Result<String, CliError> {
    Ok(include_str!("../../../configs/constant_ladder.ladder.json").to_string())
}

#[test]
fn defaults_fill_in() {
    let spec = parse_spec_str(r#"{"ladder": "l.json", "varpi": 0.6}"#, "t.json", &no_files).unwrap();
    assert_eq!(spec.search.p_max, 8);
    assert_eq!(spec.search.s_max, 12);
    assert_eq!(spec.varrho, 1.0);
    assert_eq!(spec.kappa, 1.0);
    assert_eq!(spec.outputs.certificate, "certificate.json");
    assert!((spec.tolerances.allowance - 0.1).abs() < 1e-15);
}

#[test]
fn nonpositive_varpi_names_the_field() {
    let e = parse_spec_str(r#"{"ladder": "l.json", "varpi": 0}"#, "t.json", &no_files).unwrap_err();
    assert!(e.to_string().contains("$.varpi"), "{e}");
}

#[test]
fn type_errors_carry_a_json_path() {
    let text = r#"{"ladder": "l.json", "varpi": 0.5, "search": {"p_max": "eight"}}"#;
    let e = parse_spec_str(text, "t.json", &no_files).unwrap_err();
    assert!(e.to_string().contains("$.search.p_max"), "{e}");
    let e = parse_spec_str(r#"{"ladder": "l.json", "varpi": 0.5, "extra": 1}"#, "t.json", &no_files).unwrap_err();
    assert!(matches!(e, CliError::Schema { .. }));
}

#[test]
fn both_inputs_rejected() {
    let text = r#"{"ladder": "a", "system": "b", "varpi": 0.5}"#;
    assert!(parse_spec_str(text, "t.json", &no_files).is_err());
}

#[test]
fn delay_spec_routes_through_the_delay_ladder() {
    let spec = parse_spec(&configs().join("delay_tau1_d1.json")).unwrap();
    assert!(matches!(spec.input, Input::System { .. }));
    let outcome = run_pipeline(&spec).unwrap();
    assert_eq!(outcome.exit_code(), 0, "{:?}", outcome.violations);
    let r = &outcome.report;
    assert_eq!(r["ladder"]["tail"]["kind"], "delay_dyadic");
    let m = r["certificate"]["m"].as_f64().unwrap();
    // varrho = 1 collapses the bound to m - 1
    assert_eq!(r["bound"]["value"].as_f64().unwrap(), m - 1.0);
    assert!(r["cross_check"].is_object());
    let names: Vec<_> = outcome.artifacts.iter().map(|(n, _)| n.as_str()).collect();
    assert_eq!(names, ["certificate.json", "bound_report.csv", "report.json", "trajectory.csv"]);
}

#[test]
fn ladder_spec_has_no_cross_check() {
    let outcome = run_pipeline(&parse_spec(&configs().join("constant_ladder.json")).unwrap()).unwrap();
    assert_eq!(outcome.exit_code(), 0);
    assert!(outcome.report["cross_check"].is_null());
    let b = outcome.report["bound"]["value"].as_f64().unwrap();
    let m = outcome.report["certificate"]["m"].as_f64().unwrap();
    assert!(b >= m - 1.0);
}

#[test]
fn unreachable_varpi_exits_two() {
    let ladder = configs().join("constant_ladder.ladder.json");
    let dir = tempfile::tempdir().unwrap();
    let (code, out, err) = invoke(&[
        "--output-dir",
        dir.path().to_str().unwrap(),
        "bound",
        "--ladder",
        ladder.to_str().unwrap(),
        "--varpi",
        "0.2",
    ]);
    assert_eq!(code, 2, "{out}{err}");
    assert!(err.contains("violation"));
    assert!(dir.path().join("bound_report.csv").exists());
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(invoke(&["nonsense"]).0, 1);
    assert_eq!(invoke(&["bound"]).0, 1);
    assert_eq!(invoke(&["run", "/nonexistent/spec.json"]).0, 1);
    assert_eq!(invoke(&["simulate", "--system", "x.json", "--horizon", "-1"]).0, 1);
}

#[test]
fn help_embeds_the_schemas() {
    let (code, out, _) = invoke(&["--help"]);
    assert_eq!(code, 0);
    assert!(out.contains("Pipeline spec schema"));
    assert!(out.contains("\"varpi\""));
    assert!(out.contains("Exit status"));
}

#[test]
fn simulate_writes_a_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    let system = configs().join("delay_tau1_d1.system.json");
    let (code, _, err) = invoke(&[
        "--output-dir",
        dir.path().to_str().unwrap(),
        "simulate",
        "--system",
        system.to_str().unwrap(),
        "--horizon",
        "2",
        "--step",
        "0.05",
    ]);
    assert_eq!(code, 0, "{err}");
    let csv = std::fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    assert!(csv.lines().count() > 40);
}

#[test]
fn verify_subset_prints_one_line_each() {
    let (code, out, _) = invoke(&["verify", "--only", "1,3"]);
    assert_eq!(code, 0);
    let lines: Vec<_> = out.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines.iter().all(|l| l.contains("PASS")));
}

#[test]
fn seed_override_is_deterministic() {
    let spec = configs().join("delay_tau1_d1.json");
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let (code, _, err) =
            invoke(&["--seed", "11", "--output-dir", d.path().to_str().unwrap(), "run", spec.to_str().unwrap()]);
        assert_eq!(code, 0, "{err}");
    }
    for f in ["report.json", "bound_report.csv"] {
        assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap());
    }
}
