use std::fs;
use std::path::{Path, PathBuf};

use clap::Parser;
use serde_json::Value;

use transit_remediation::cli::{run, write_fixture, Cli, CliError};
use transit_remediation::fixtures::suburb;
use transit_remediation::full_ip::parse_lp;
use transit_remediation::pipeline::PlanDocument;
use transit_remediation::scenario::read_amenities;

fn fixtures_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

fn cmd(out: &Path, args: &[&str]) -> Result<String, CliError> {
    let config = fixtures_dir().join("suburb.json");
    let mut argv = vec![
        "transit-remediation".to_string(),
        "--config".into(),
        config.display().to_string(),
        "--out".into(),
        out.display().to_string(),
    ];
    argv.extend(args.iter().map(|s| s.to_string()));
    run(&Cli::try_parse_from(argv).unwrap())
}

#[test]
fn bundled_fixture_matches_generator() {
    let (config, amenities) = suburb();
    let text = fs::read_to_string(fixtures_dir().join("suburb.json")).unwrap();
    assert_eq!(text, config.to_json());
    assert_eq!(read_amenities(&fixtures_dir().join("suburb_amenities.csv")).unwrap(), amenities);

    let dir = tempfile::tempdir().unwrap();
    write_fixture(dir.path()).unwrap();
    for f in ["suburb.json", "suburb_amenities.csv"] {
        assert_eq!(fs::read(dir.path().join(f)).unwrap(), fs::read(fixtures_dir().join(f)).unwrap());
    }
}

#[test]
fn missing_and_stale_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    match cmd(dir.path(), &["disrupt"]) {
        Err(CliError::MissingArtifact { command, .. }) => assert_eq!(command, "build"),
        other => panic!("{other:?}"),
    }
    cmd(dir.path(), &["build"]).unwrap();
    match cmd(dir.path(), &["--dmax-m", "400", "disrupt"]) {
        Err(CliError::StaleArtifact { command, .. }) => assert_eq!(command, "build"),
        other => panic!("{other:?}"),
    }
    match cmd(dir.path(), &["remediate", "--extra-buses", "1"]) {
        Err(CliError::MissingArtifact { command, .. }) => assert_eq!(command, "disrupt"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn commands_are_idempotent_and_baseline_zero_equals_disrupt() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    cmd(out, &["build"]).unwrap();
    let first = fs::read(out.join("build/network.json")).unwrap();
    cmd(out, &["build"]).unwrap();
    assert_eq!(first, fs::read(out.join("build/network.json")).unwrap());
    cmd(out, &["disrupt"]).unwrap();
    cmd(out, &["baseline", "--extra-buses", "0"]).unwrap();
    assert_eq!(
        fs::read(out.join("disrupt/acc_disr.csv")).unwrap(),
        fs::read(out.join("baseline_b0/acc_repl.csv")).unwrap()
    );
}

#[test]
fn remediate_without_extra_buses() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    cmd(out, &["build"]).unwrap();
    cmd(out, &["disrupt"]).unwrap();
    cmd(out, &["remediate", "--extra-buses", "0"]).unwrap();
    let plan: PlanDocument =
        serde_json::from_str(&fs::read_to_string(out.join("remediate_b0_w1/plan.json")).unwrap()).unwrap();
    assert_eq!(plan.fleets.iter().map(|f| f.added).sum::<i64>(), 0);
    assert!(!plan.extensions.is_empty());
    for f in &plan.fleets {
        assert_eq!(f.regular + f.ext_a + f.ext_b, f.base as i64);
    }
}

#[test]
fn export_ip_writes_parsable_model() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    cmd(out, &["build"]).unwrap();
    cmd(out, &["disrupt"]).unwrap();
    cmd(out, &["export-ip", "--extra-buses", "2", "--weight-f2", "0.5"]).unwrap();
    let lp = fs::read_to_string(out.join("ip_b2_w0p5/model.lp")).unwrap();
    let summary = parse_lp(&lp).unwrap();
    assert!(summary.binaries > 0);
    assert!(summary.constraints.iter().any(|c| c.starts_with("c18")), "{:?}", &summary.constraints[..3]);
}

#[test]
fn full_pipeline_matches_golden_summary() {
    let dir = tempfile::tempdir().unwrap();
    cmd(dir.path(), &["run", "--extra-buses", "10"]).unwrap();
    let got: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("report_b10_w1/summary.json")).unwrap()).unwrap();
    let want: Value =
        serde_json::from_str(&fs::read_to_string(fixtures_dir().join("golden/summary_b10.json")).unwrap()).unwrap();
    let (got, want) = (got.as_object().unwrap(), want.as_object().unwrap());
    assert_eq!(got.keys().collect::<Vec<_>>(), want.keys().collect::<Vec<_>>());
    for (k, w) in want {
        let (g, w) = (got[k].as_f64().unwrap(), w.as_f64().unwrap());
        assert!((g - w).abs() <= 1e-9 * w.abs().max(1.0), "{k}: {g} vs {w}");
    }

    let report = dir.path().join("report_b10_w1");
    let map: Value = serde_json::from_str(&fs::read_to_string(report.join("map.geojson")).unwrap()).unwrap();
    let plan: PlanDocument = serde_json::from_str(&fs::read_to_string(report.join("plan.json")).unwrap()).unwrap();
    let (config, _) = suburb();
    // the disrupted rail line is gone from the remediated network
    assert_eq!(map["features"].as_array().unwrap().len(), 225 + config.lines.len() - 1 + plan.extensions.len());
}

#[test]
fn config_errors_surface() {
    let dir = tempfile::tempdir().unwrap();
    let argv = ["transit-remediation", "--config", "/nonexistent/suburb.json", "build"];
    assert!(matches!(run(&Cli::try_parse_from(argv).unwrap()), Err(CliError::ConfigError(_))));
    let argv = ["transit-remediation", "--out", dir.path().to_str().unwrap(), "build"];
    assert!(matches!(run(&Cli::try_parse_from(argv).unwrap()), Err(CliError::ConfigError(_))));
}
