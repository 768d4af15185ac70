use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_carnot-calc"))
        .args(args)
        .env_remove("CARNOT_CALC_JOBS")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn report(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

#[test]
fn engel_builtin_is_valid() {
    let out = run(&["group", "engel"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["result"]["dimension"], 4);
    assert_eq!(v["verdict"], "pass");
}

#[test]
fn broken_antisymmetry_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(
        &path,
        r#"{"step": 2, "layer_dims": [2, 1],
            "brackets": [{"i": 1, "j": 2, "k": 3, "c": 1.0}, {"i": 2, "j": 1, "k": 3, "c": 1.0}]}"#,
    )
    .unwrap();
    let out = run(&["group", "--file", path.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("antisymmetry"), "{}", stderr(&out));
}

#[test]
fn free_rank_four_has_dimension_ten() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["group", "free4", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains("dimension 10"), "{}", stdout(&out));
    assert_eq!(report(dir.path())["result"]["dimension"], 4 + 4 * 3 / 2);
    let brackets = std::fs::read_to_string(dir.path().join("brackets.csv")).unwrap();
    assert_eq!(brackets.lines().count(), 1 + 6);
}

#[test]
fn linear_heisenberg_area_is_sqrt_two() {
    let out = run(&["area", "--group", "h1", "--phi", "c*x2", "--c", "1", "--box", "unit"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    let value = v["result"]["value"].as_f64().unwrap();
    assert!((value - 2f64.sqrt()).abs() < 1e-4, "{value}");
}

#[test]
fn engel_uid_verdicts_follow_alpha() {
    let pass = run(&["verify", "uid", "--catalog", "engel_phi_alpha", "--alpha", "0.5"]);
    assert_eq!(code(&pass), 0, "{}", stderr(&pass));
    let fail = run(&["verify", "uid", "--catalog", "engel_phi_alpha", "--alpha", "0.3333333"]);
    assert_eq!(code(&fail), 1, "{}", stderr(&fail));
    let v: serde_json::Value = serde_json::from_str(&stdout(&fail)).unwrap();
    assert_eq!(v["verdict"], "fail");
}

#[test]
fn reports_are_byte_identical_for_a_seed() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = |dir: &Path| {
        vec![
            "verify".to_string(),
            "lipschitz".into(),
            "--group".into(),
            "h2".into(),
            "--phi".into(),
            "0.3*x2*x3 + sin(x5)".into(),
            "--seed".into(),
            "17".into(),
            "--jobs".into(),
            "3".into(),
            "--out".into(),
            dir.to_str().unwrap().into(),
        ]
    };
    for dir in [a.path(), b.path()] {
        let argv = args(dir);
        let refs: Vec<&str> = argv.iter().map(|s| s.as_str()).collect();
        assert_eq!(code(&run(&refs)), 0);
    }
    for file in ["report.json", "residuals.csv"] {
        let x = std::fs::read(a.path().join(file)).unwrap();
        let y = std::fs::read(b.path().join(file)).unwrap();
        assert_eq!(x, y, "{file} differs");
    }
}

#[test]
fn config_file_drives_a_run() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.json");
    std::fs::write(
        &path,
        r#"{"group": "engel", "phi": ["x4"], "point": [0.1, 0.0, 0.2],
            "checks": {"flow": {"direction": 3, "t_fwd": 0.5}}}"#,
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    let out = run(&["flow", "--config", path.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let v = report(&out_dir);
    assert_eq!(v["result"]["direction"], 3);
    assert_eq!(v["config"]["group"], "engel");
    let csv = std::fs::read_to_string(out_dir.join("curve.csv")).unwrap();
    assert!(csv.starts_with("t,x2,x3,x4,phi1"));
    assert_eq!(csv.lines().count(), 1 + 501);
}

#[test]
fn config_errors_name_the_location() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.json");
    std::fs::write(&path, "{\"group\": \"h1\",\n \"phii\": [\"x2\"]}").unwrap();
    let out = run(&["verify", "broad", "--config", path.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    let err = stderr(&out);
    assert!(err.contains("phii") && err.contains("line 2"), "{err}");

    let out = run(&["verify", "uid", "--group", "h1", "--phi", "x2 +"]);
    assert_eq!(code(&out), 2, "{}", stderr(&out));
    let out = run(&["verify", "uid", "--catalog", "no_such_entry"]);
    assert_eq!(code(&out), 2, "{}", stderr(&out));
}

#[test]
fn nan_values_are_a_numerical_breakdown() {
    let out = run(&["flow", "--group", "h1", "--phi", "sqrt(x2 - 5)"]);
    assert_eq!(code(&out), 3, "{}\n{}", stdout(&out), stderr(&out));
}

#[test]
fn catalog_list_and_run() {
    let out = run(&["catalog", "list"]);
    assert_eq!(code(&out), 0);
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    let names: Vec<&str> = v["result"]["entries"]
        .as_array()
        .unwrap()
        .iter()
        .map(|e| e["name"].as_str().unwrap())
        .collect();
    assert_eq!(names.len(), 8);
    assert!(names.contains(&"serapioni"));

    let out = run(&["catalog", "run", "heisenberg_characteristic"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let out = run(&["catalog", "run", "engel_phi_alpha", "--alpha", "0.3333333333333333"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
}

#[test]
fn lift_reports_small_residuals() {
    let out = run(&["lift", "--group", "h2", "--phi", "0.2*x2*x2 + x5", "--direction", "3"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert!(v["result"]["homomorphism_residual"].as_f64().unwrap() < 1e-13);
    assert!(v["result"]["projection_residual"].as_f64().unwrap() < 1e-10);
}
