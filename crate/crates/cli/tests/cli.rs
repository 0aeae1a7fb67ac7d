mod common;

use common::*;
use serde_json::Value;

fn json_of(args: &[&str]) -> Value {
    let out = run(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn assert_valid(doc: &Value) {
    let schema = schema();
    let errors = Validator::new(&schema).errors(doc);
    assert!(errors.is_empty(), "schema violations: {errors:#?}");
}

#[test]
fn analyze_dual_tilt_trirotor_is_od_and_csh() {
    let doc = json_of(&["analyze", "--preset", "dualtilt-trirotor", "--mass", "1.0", "--umax", "9.81"]);
    assert_valid(&doc);
    assert_eq!(doc["class"], "OD");
    assert_eq!(doc["csh"], true);
    assert_eq!(doc["ranks"]["a"], 6);
    assert_eq!(doc["manifest"]["overrides"]["umax"], "9.81");
}

#[test]
fn presets_lists_six_builtins() {
    let doc = json_of(&["presets"]);
    assert_valid(&doc);
    assert_eq!(doc["presets"].as_array().unwrap().len(), 6);
    let out = run(&["presets", "--format", "csv"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 8);
    assert!(text.lines().next().unwrap().starts_with("# {"));
    assert_eq!(text.lines().nth(1), Some("name,description"));
}

#[test]
fn quadrotor_odl_is_zero_with_warning() {
    let out = run(&["odl", "--preset", "quadrotor"]);
    assert!(out.status.success());
    let doc: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_valid(&doc);
    assert_eq!(doc["odl"].as_f64(), Some(0.0));
    assert!(doc["warning"].is_string());
    assert!(String::from_utf8_lossy(&out.stderr).contains("warning"));
}

#[test]
fn reruns_are_byte_identical() {
    for args in [
        &["odl", "--preset", "dualtilt-trirotor", "--resolution", "256"][..],
        &["hover-map", "--preset", "trirotor-tail", "--step", "30"][..],
        &["lhi", "--preset", "dualtilt-trirotor", "--phi", "130", "--theta", "-58"][..],
        &["simulate", "--preset", "dualtilt-trirotor", "--phi", "90", "--duration", "0.05", "--format", "csv"][..],
    ] {
        let a = run(args);
        let b = run(args);
        assert!(a.status.success(), "{args:?}");
        assert_eq!(a.stdout, b.stdout, "{args:?}");
        assert!(!a.stdout.contains(&b'\r'));
    }
}

#[test]
fn thread_count_does_not_change_results() {
    let base = ["odl", "--preset", "trirotor-radial", "--resolution", "256"];
    let one = run(&[&base[..], &["--threads", "1"]].concat());
    let four = run(&[&base[..], &["--threads", "4"]].concat());
    assert!(one.status.success() && four.status.success());
    assert_eq!(one.stdout, four.stdout);
}

#[test]
fn exit_codes() {
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(run(&["odl", "--preset", "hexacopter"]).status.code(), Some(2));
    assert_eq!(run(&["odl"]).status.code(), Some(2));
    assert_eq!(run(&["odl", "/nonexistent/platform.toml"]).status.code(), Some(2));
    assert_eq!(run(&["odl", "--preset", "quadrotor", "--umax", "9=1"]).status.code(), Some(2));
    assert_eq!(run(&["odl", "--preset", "quadrotor", "--mass", "-1"]).status.code(), Some(2));
    assert_eq!(run(&["analyze", "--preset", "quadrotor", "--format", "csv"]).status.code(), Some(2));
    // a level quadrotor cannot hover upside down
    let out = run(&["hover-solve", "--preset", "quadrotor", "--phi", "180"]);
    assert_eq!(out.status.code(), Some(1));
    let doc: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_valid(&doc);
    assert_eq!(doc["feasible"], false);
    assert_eq!(run(&["lhi", "--preset", "quadrotor", "--phi", "180"]).status.code(), Some(1));
}

#[test]
fn every_json_subcommand_matches_the_schema() {
    let cases: [&[&str]; 10] = [
        &["hover-solve", "--preset", "dualtilt-trirotor", "--phi", "130", "--theta", "-58"],
        &["hover-map", "--preset", "trirotor-tail", "--step", "45", "--format", "json"],
        &["force-set", "--preset", "trirotor-radial", "--resolution", "64", "--format", "json"],
        &["lhi", "--preset", "dualtilt-trirotor", "--phi", "90", "--calibrate", "0.0215"],
        &["lhi-map", "--preset", "dualtilt-trirotor", "--step", "60", "--format", "json"],
        &["moment-sets", "--preset", "dualtilt-trirotor", "--resolution", "32", "--format", "json"],
        &["simulate", "--preset", "quadrotor", "--duration", "0.1"],
        &["dump-allocation", "--preset", "birotor-dualtilt", "--format", "json"],
        &["dump-allocation", "--preset", "dualtilt-trirotor", "--matrix", "jacobian", "--format", "json"],
        &["analyze", "--preset", "dualtilt-trirotor-failed3", "--resolution", "256"],
    ];
    for args in cases {
        let doc = json_of(args);
        assert_valid(&doc);
    }
}

#[test]
fn calibration_hits_its_target() {
    let doc = json_of(&["lhi", "--preset", "dualtilt-trirotor", "--phi", "90", "--calibrate", "0.0215"]);
    let lhi = doc["lhi"].as_f64().unwrap();
    assert!((lhi - 0.0215).abs() < 1e-9, "{lhi}");
    assert_eq!(doc["manifest"]["parameters"]["calibrate_target"].as_f64(), Some(0.0215));
}

#[test]
fn csv_artifacts_are_well_formed() {
    let out = run(&["dump-allocation", "--preset", "dualtilt-trirotor"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].starts_with("# "));
    let manifest: Value = serde_json::from_str(&lines[0][2..]).unwrap();
    assert_eq!(manifest["subcommand"], "dump-allocation");
    let width = lines[1].split(',').count();
    assert_eq!(width, 10);
    assert_eq!(lines.len(), 8);
    assert!(lines[2..].iter().all(|l| l.split(',').count() == width));
    assert!(text.ends_with('\n') && !text.contains('\r'));
}

#[test]
fn out_dir_writes_both_simulation_artifacts() {
    let dir = scratch_dir("sim-out");
    let out = bin()
        .args(["simulate", "--preset", "quadrotor", "--duration", "0.02"])
        .env("MRAV_HOVER_OUT_DIR", &dir)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out.stdout.is_empty());
    let doc: Value = serde_json::from_str(&std::fs::read_to_string(dir.join("simulate.json")).unwrap()).unwrap();
    assert_valid(&doc);
    assert_eq!(doc["manifest"]["outputs"].as_array().unwrap().len(), 2);
    let csv = std::fs::read_to_string(dir.join("simulate.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2 + 20);
}

#[test]
fn config_files_load_and_report_their_path() {
    let dir = scratch_dir("config");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("tri.toml");
    std::fs::write(
        &path,
        r#"
mass = 1.0
inertia = [[0.01, 0, 0], [0, 0.01, 0], [0, 0, 0.02]]

[[propellers]]
position = [0.2, 0.0, 0.0]
drag_ratio = 0.012
tilt = "dual"
u_max = 10.0
u_rate_max = 200.0
angle_rate_max = 4.1

[[propellers]]
position = [-0.1, 0.17320508075688773, 0.0]
drag_ratio = -0.012
tilt = "dual"
u_max = 10.0
u_rate_max = 200.0
angle_rate_max = 4.1

[[propellers]]
position = [-0.1, -0.17320508075688773, 0.0]
drag_ratio = 0.012
tilt = "dual"
u_max = 10.0
u_rate_max = 200.0
angle_rate_max = 4.1
"#,
    )
    .unwrap();
    let p = path.to_str().unwrap();
    let doc = json_of(&["odl", p, "--resolution", "256"]);
    assert_valid(&doc);
    assert_eq!(doc["manifest"]["source"]["config"], p);
    let from_preset = json_of(&["odl", "--preset", "dualtilt-trirotor", "--umax", "10", "--resolution", "256"]);
    assert_eq!(doc["odl"], from_preset["odl"]);

    std::fs::write(&path, "mass = 1.0\nbogus = 2\n").unwrap();
    assert_eq!(run(&["odl", p]).status.code(), Some(2));
}
