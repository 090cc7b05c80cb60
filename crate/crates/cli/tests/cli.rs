use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_seqweak");

fn config(name: &str) -> String {
    format!("{}/configs/{name}", env!("CARGO_MANIFEST_DIR"))
}

fn seqweak(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

#[test]
fn exact_run_writes_csv_and_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("fig2.csv");
    let out = seqweak(&["run", &config("fig2.cfg"), "--out", csv.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 38);
    assert!(text.lines().any(|l| l.starts_with("135,") && l.ends_with(",diverged")));
    let meta = std::fs::read_to_string(dir.path().join("fig2.json")).unwrap();
    assert!(meta.contains("\"seed\": 2024"));
}

#[test]
fn sampled_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("small.cfg");
    std::fs::write(
        &cfg,
        r#"{"pre_state": "plus", "post_select": "sweep", "theta_deg_step": 30,
            "modules": [{"observable": "sy", "gamma_deg": 20}, {"observable": "sz", "gamma_deg": 20}],
            "shots": 20000, "resamples": 100}"#,
    )
    .unwrap();
    let mut outputs = Vec::new();
    for name in ["a.csv", "b.csv"] {
        let path = dir.path().join(name);
        let out = seqweak(&["run", cfg.to_str().unwrap(), "--mode", "sampled", "--seed", "9", "--out", path.to_str().unwrap()]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        outputs.push((std::fs::read(&path).unwrap(), std::fs::read(path.with_extension("json")).unwrap()));
    }
    assert_eq!(outputs[0], outputs[1]);
    let csv = String::from_utf8(outputs[0].0.clone()).unwrap();
    let row = csv.lines().nth(1).unwrap();
    assert!(!row.split(',').nth(9).unwrap().is_empty(), "sampled rows carry SDs: {row}");
}

#[test]
fn stdout_when_no_output_path() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("fixed.cfg");
    std::fs::write(&cfg, r#"{"pre_state": "plus", "post_select": "h", "modules": [{"observable": "sz", "gamma_deg": 25}]}"#)
        .unwrap();
    let out = seqweak(&["run", cfg.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.lines().nth(1).unwrap().starts_with(",1,0,"), "{stdout}");
}

#[test]
fn validation_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.cfg");
    std::fs::write(&bad, r#"{"pre_state": "plus", "post_select": "sweep", "modules": []}"#).unwrap();
    let out = seqweak(&["run", bad.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("modules"));
    assert_eq!(code(&seqweak(&["run", "/nonexistent/config.cfg"])), 2);
    assert_eq!(code(&seqweak(&["verify-optics", "--grid", "huge"])), 2);
    assert_eq!(code(&seqweak(&["frobnicate"])), 2);
    let out = Command::new(BIN).args(["verify-optics"]).env("SEQWEAK_THREADS", "zero").output().unwrap();
    assert_eq!(code(&out), 2);
}

#[test]
fn unwritable_output_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("missing").join("out.csv");
    assert!(!Path::new(&target).parent().unwrap().exists());
    let out = seqweak(&["run", &config("fig3.cfg"), "--out", target.to_str().unwrap()]);
    assert_eq!(code(&out), 3);
}

#[test]
fn verify_optics_passes() {
    let out = Command::new(BIN).args(["verify-optics"]).env("SEQWEAK_THREADS", "2").output().unwrap();
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("48/48 modules verified"));
}

#[test]
fn selftest_passes() {
    let out = seqweak(&["selftest"]);
    let text = String::from_utf8_lossy(&out.stdout);
    assert_eq!(code(&out), 0, "{text}");
    assert_eq!(text.lines().filter(|l| l.starts_with("[PASS]")).count(), 9);
}
