use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use dsdm_core::scenario::parse_params;
use dsdm_core::trace::{TraceRecord, CSV_HEADER};
use dsdm_core::{ActuatorParams, Phase};

fn dsdm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dsdm"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn repo(path: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..").join(path)
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn simulate(scenario: &Path, csv: &Path, extra: &[&str]) -> Output {
    let mut args = vec![
        "simulate",
        "--scenario",
        scenario.to_str().unwrap(),
        "--out",
        csv.to_str().unwrap(),
    ];
    args.extend_from_slice(extra);
    dsdm(&args)
}

fn read_trace(csv: &Path) -> Vec<TraceRecord> {
    let text = std::fs::read_to_string(csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some(CSV_HEADER));
    lines.map(|l| TraceRecord::parse_csv_row(l).unwrap()).collect()
}

fn latency_ms(summary: &str) -> f64 {
    summary
        .lines()
        .find_map(|l| l.strip_prefix("shift_latency_ms: "))
        .and_then(|v| v.parse().ok())
        .expect("summary reports a latency")
}

#[test]
fn stiff_heavy_meets_the_latency_target() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("trace.csv");
    let out = simulate(&repo("scenarios/stiff_heavy.scenario"), &csv, &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = stdout(&out);
    assert!(latency_ms(&summary) <= 30.0, "{summary}");
    assert!(summary.contains("w_o_dip_rad_s: ") && summary.contains("peak_output_torque_nm: "));
    let trace = read_trace(&csv);
    assert_eq!(trace.len(), 3000);
    assert_eq!(trace.last().unwrap().ctrl_phase, Phase::SteadyHf);
}

#[test]
fn fixed_ground_stalls_at_the_contact_angle() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("trace.csv");
    let out = simulate(&repo("scenarios/fixed_ground.scenario"), &csv, &[]);
    assert!(out.status.success());
    assert!(latency_ms(&stdout(&out)) <= 30.0);
    let last = *read_trace(&csv).last().unwrap();
    assert_eq!(last.ctrl_phase, Phase::SteadyHf);
    assert!(last.brake_engaged);
    assert_eq!(last.theta_o, 0.3);
    assert_eq!(last.w_o, 0.0);
}

#[test]
fn compliant_load_engages_without_impact() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("trace.csv");
    let out = simulate(&repo("scenarios/compliant.scenario"), &csv, &[]);
    assert!(out.status.success());
    let trace = read_trace(&csv);
    assert_eq!(trace.last().unwrap().ctrl_phase, Phase::SteadyHf);
    assert!(trace.iter().any(|r| r.contact_active));
}

#[test]
fn output_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    let scenario = repo("scenarios/stiff_heavy.scenario");
    assert!(simulate(&scenario, &a, &[]).status.success());
    assert!(simulate(&scenario, &b, &[]).status.success());
    assert_eq!(std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
}

#[test]
fn flags_override_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("trace.csv");
    let out = simulate(
        &repo("scenarios/fixed_ground.scenario"),
        &csv,
        &["--dt", "5e-4", "--duration", "0.1"],
    );
    assert!(out.status.success());
    let trace = read_trace(&csv);
    assert_eq!(trace.len(), 200);
    assert!((trace[1].t - 5e-4).abs() < 1e-15);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("trace.csv");

    assert_eq!(dsdm(&["simulate", "--scenario"]).status.code(), Some(1));
    assert_eq!(dsdm(&["launch"]).status.code(), Some(1));
    assert_eq!(dsdm(&["--help"]).status.code(), Some(0));

    let bad = dir.path().join("bad.scenario");
    std::fs::write(&bad, "[load]\ntype = free\ntype = fixed\n").unwrap();
    let out = simulate(&bad, &csv, &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));

    let missing = dir.path().join("missing.scenario");
    assert_eq!(simulate(&missing, &csv, &[]).status.code(), Some(2));

    let ok = repo("scenarios/fixed_ground.scenario");
    assert_eq!(simulate(&ok, &csv, &["--dt", "0.01"]).status.code(), Some(2));

    let unwritable = dir.path().join("no/such/dir/trace.csv");
    assert_eq!(simulate(&ok, &unwritable, &[]).status.code(), Some(3));
}

#[test]
fn unknown_keys_only_warn() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = dir.path().join("warn.scenario");
    std::fs::write(&scenario, "[load]\ntype = free\nmass = 3\n[sim]\nduration = 0.01\n").unwrap();
    let out = simulate(&scenario, &dir.path().join("t.csv"), &[]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("warning"));
    assert!(stdout(&out).contains("shift_latency_ms: none"));
}

#[test]
fn verify_passes_and_is_reproducible() {
    let a = dsdm(&["verify", "--seed", "11", "--cases", "300"]);
    assert_eq!(a.status.code(), Some(0), "{}", stdout(&a));
    let text = stdout(&a);
    for name in ["momentum_identity", "oracle_equivalence", "nullspace_invariance", "energy_dissipation"] {
        assert!(text.lines().any(|l| l.starts_with("PASS") && l.contains(name)), "{text}");
    }
    let b = dsdm(&["verify", "--seed", "11", "--cases", "300"]);
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn fit_params_prints_the_bundled_file() {
    let out = dsdm(&["fit-params"]);
    assert!(out.status.success());
    let printed = stdout(&out);
    let params = parse_params(&printed).unwrap();
    assert_eq!(params, ActuatorParams::prototype());
    let bundled = std::fs::read_to_string(repo("params/dsdm_default.ini")).unwrap();
    assert_eq!(printed, bundled);
}
