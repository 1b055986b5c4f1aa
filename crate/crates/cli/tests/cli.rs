use std::path::Path;
use std::process::{Command, Output};

fn safenet(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_safenet"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn gram_check_reports_unit_and_scaled_conditioning() {
    let dir = tempfile::tempdir().unwrap();
    let o = safenet(&["gram-check"], dir.path());
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!((v["condition"].as_f64().unwrap() - 1.0).abs() <= 1e-6);
    let o = safenet(&["gram-check", "--first-coeff", "2"], dir.path());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!((v["nonzero_ratio"].as_f64().unwrap() - 4.0).abs() <= 1e-6);
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"seeds": []}"#).unwrap();
    let o = safenet(&["train", "--config", bad.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let o = safenet(&["train", "--config", "missing.json"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let o = safenet(&["train", "--method", "nope"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn train_writes_reports_and_evaluate_reproduces_the_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(
        &cfg,
        r#"{"experiments": [{"problem": "wave", "method": "SAFENET", "schedule": "S1",
            "seeds": [0], "max_iterations": 5, "sizes": {"n_res": 64, "n_bc": 16, "n_ic": 16}}]}"#,
    )
    .unwrap();
    let o = safenet(&["train", "--config", "cfg.json", "--out", "res"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = dir.path().join("res");
    for f in ["results.json", "results.csv", "summary.json"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert!(summary["summary"].get("wave/SAFENET/S1").is_some());
    let rows: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("results.json")).unwrap()).unwrap();
    let l2re = rows[0]["l2re"].as_f64().unwrap();
    let stem = format!("wave_SAFENET_S1_{}_seed0", rows[0]["config_hash"].as_str().unwrap());
    let traj = out.join(format!("runs/{stem}.csv"));
    let ckpt = format!("res/checkpoints/{stem}.ckpt");

    let o = safenet(
        &["evaluate", "--checkpoint", &ckpt, "--out", "field.csv"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let reported: f64 = stdout(&o).trim().trim_start_matches("L2RE ").parse().unwrap();
    assert!((reported - l2re).abs() <= 1e-6 * l2re);
    let field = std::fs::read_to_string(dir.path().join("field.csv")).unwrap();
    assert_eq!(field.lines().count(), 1 + 101 * 101);

    // a second identical run overwrites with identical bytes
    let first = std::fs::read(&traj).unwrap();
    assert!(safenet(&["train", "--config", "cfg.json", "--out", "res"], dir.path()).status.success());
    assert_eq!(first, std::fs::read(&traj).unwrap());
}

#[test]
fn oracle_build_skips_closed_form_problems() {
    let dir = tempfile::tempdir().unwrap();
    let o = safenet(&["oracle-build", "--problems", "wave"], dir.path());
    assert!(o.status.success());
    assert!(stdout(&o).contains("closed form"));
}
