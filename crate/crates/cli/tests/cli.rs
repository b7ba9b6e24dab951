use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_adjwalk"))
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("adjwalk-cli-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn run(args: &[&str], out: &Path) -> Output {
    bin().args(args).arg("--out-dir").arg(out).output().unwrap()
}

fn status_json(o: &Output) -> serde_json::Value {
    let text = String::from_utf8(o.stdout.clone()).unwrap();
    serde_json::from_str(text.lines().last().expect("status line")).unwrap()
}

fn read_dir_sorted(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap())
        })
        .collect();
    v.sort();
    v
}

const SIMULATE: &[&str] =
    &["simulate", "--n", "16", "--lambda", "0.5", "--alpha1", "1", "--t-max", "8", "--trajectories", "1000", "--seed", "42"];

#[test]
fn version_names_the_suite() {
    let o = bin().arg("--version").output().unwrap();
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("adjwalk") && text.contains("acceptance suite 1.0"), "{text}");
}

#[test]
fn simulate_writes_hashed_tables_and_summary() {
    let out = scratch("simulate");
    let o = run(SIMULATE, &out);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let status = status_json(&o);
    assert_eq!(status["status"], "pass");
    let hash = status["manifest_sha256"].as_str().unwrap().to_string();
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["manifest_sha256"], hash.as_str());
    assert_eq!(summary["passed"], true);
    for name in ["trajectory.csv", "mean_profile.csv"] {
        let text = std::fs::read_to_string(out.join(name)).unwrap();
        let mut lines = text.split("\r\n");
        assert_eq!(lines.next().unwrap(), format!("# manifest_sha256={hash}"));
        let header = lines.next().unwrap();
        assert!(header.starts_with("t,k,"), "{header}");
        for row in lines.filter(|l| !l.is_empty()) {
            for cell in row.split(',').filter(|c| !c.is_empty()) {
                assert!(cell.parse::<f64>().is_ok_and(f64::is_finite), "{cell}");
            }
        }
    }
    let _ = std::fs::remove_dir_all(&out);
}

#[test]
fn same_seed_gives_identical_bytes() {
    let (a, b) = (scratch("det-a"), scratch("det-b"));
    assert!(run(SIMULATE, &a).status.success());
    assert!(run(SIMULATE, &b).status.success());
    assert_eq!(read_dir_sorted(&a), read_dir_sorted(&b));
    let _ = std::fs::remove_dir_all(&a);
    let _ = std::fs::remove_dir_all(&b);
}

#[test]
fn manifest_file_reproduces_flag_run() {
    let (a, b) = (scratch("mf-a"), scratch("mf-b"));
    assert!(run(SIMULATE, &a).status.success());
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(a.join("summary.json")).unwrap()).unwrap();
    let path = b.join("manifest.json");
    std::fs::write(&path, serde_json::to_string(&summary["manifest"]).unwrap()).unwrap();
    let out = b.join("out");
    let o = bin().args(["run", "--manifest"]).arg(&path).arg("--out-dir").arg(&out).output().unwrap();
    assert!(o.status.success());
    assert_eq!(read_dir_sorted(&a), read_dir_sorted(&out));
    let _ = std::fs::remove_dir_all(&a);
    let _ = std::fs::remove_dir_all(&b);
}

#[test]
fn flags_override_manifest_values() {
    let dir = scratch("override");
    let path = dir.join("m.json");
    let m = r#"{"kind":"simulate","params":{"n":8,"lambda":0.5,"alpha1":1.0},"t_max":2.0,"trajectories":100,"seed":1,"tool_version":"0"}"#;
    std::fs::write(&path, m).unwrap();
    let out = dir.join("out");
    let o = bin()
        .args(["simulate", "--manifest", path.to_str().unwrap(), "--seed", "9", "--out-dir"])
        .arg(&out)
        .output()
        .unwrap();
    assert!(o.status.success());
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["manifest"]["seed"], 9);
    assert_eq!(summary["manifest"]["params"]["n"], 8);
    // The manifest was written for another version.
    assert!(String::from_utf8_lossy(&o.stderr).contains("warning"));
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn env_var_sets_default_output_dir() {
    let dir = scratch("env");
    let o = bin()
        .args(["simulate", "--n", "4", "--lambda", "0.5", "--t-max", "1", "--trajectories", "10"])
        .env("ADJWALK_OUT_DIR", &dir)
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(dir.join("summary.json").exists());
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn usage_errors_exit_2() {
    let out = scratch("usage");
    assert_eq!(run(&["simulate", "--n", "1", "--lambda", "0.5"], &out).status.code(), Some(2));
    assert_eq!(run(&["simulate", "--n", "8", "--lambda", "1.5"], &out).status.code(), Some(2));
    assert_eq!(run(&["--threads", "0", "simulate"], &out).status.code(), Some(2));
    assert_eq!(run(&["cutoff-sweep", "--schedule", "64:0.1"], &out).status.code(), Some(2));
    let bad = out.join("bad.json");
    std::fs::write(&bad, r#"{"kind":"decay","trajectories":1,"seed":1,"tool_version":"x","bogus":1}"#).unwrap();
    let o = bin().args(["run", "--manifest"]).arg(&bad).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    let missing = bin().args(["run", "--manifest", "/nonexistent/m.json"]).output().unwrap();
    assert_eq!(missing.status.code(), Some(2));
    let wrong_kind = out.join("decay.json");
    std::fs::write(&wrong_kind, r#"{"kind":"decay","trajectories":1,"seed":1,"tool_version":"x"}"#).unwrap();
    let o = bin().args(["simulate", "--manifest"]).arg(&wrong_kind).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    let _ = std::fs::remove_dir_all(&out);
}

#[test]
fn failed_check_exits_1_with_report() {
    // A half-unit grid is too coarse to pin the two-site window to 20%.
    let out = scratch("fail");
    let o = run(
        &["mixing", "--n", "2", "--lambda", "0.3", "--times", "0.5,1,1.5,2,2.5,3,3.5,4", "--trajectories", "1000"],
        &out,
    );
    assert_eq!(o.status.code(), Some(1), "{}", String::from_utf8_lossy(&o.stderr));
    let status = status_json(&o);
    assert_eq!(status["status"], "fail");
    let failed = status["failed"].as_array().unwrap();
    assert!(failed.iter().any(|c| c["name"] == "two_site_window"), "{status}");
    let _ = std::fs::remove_dir_all(&out);
}
