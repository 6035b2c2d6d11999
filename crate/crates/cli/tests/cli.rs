use std::path::Path;
use std::process::{Command, Output};

fn rpce(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rpce"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn rpce_env(args: &[&str], dir: &Path, threads: &str) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rpce"))
        .args(args)
        .current_dir(dir)
        .env("RPCE_THREADS", threads)
        .output()
        .expect("binary runs")
}

const SMALL: &str = r#"{
  "problem": {"name": "ridge", "d": 3},
  "methods": ["mc", "l1", "adm"],
  "m_values": [24, 40],
  "replicates": 3,
  "seed": 5,
  "reference": {"kind": "exact"},
  "rel_l2_samples": 2000
}"#;

#[test]
fn version_and_problem_listing() {
    let dir = tempfile::tempdir().unwrap();
    let out = rpce(&["version"], dir.path());
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("rpce-surrogate v1"));

    let out = rpce(&["problems"], dir.path());
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for name in ["ridge", "compressible", "kdv", "groundwater", "highdim"] {
        assert!(text.contains(name), "{text}");
    }
    let out = rpce(&["problems", "highdim"], dir.path());
    assert!(String::from_utf8(out.stdout)
        .unwrap()
        .contains("no-interaction"));
    assert_eq!(
        rpce(&["problems", "nope"], dir.path()).status.code(),
        Some(2)
    );
}

#[test]
fn experiment_outputs_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("cfg.json"), SMALL).unwrap();
    let a = rpce(
        &["experiment", "cfg.json", "--out", "a", "--tsv"],
        dir.path(),
    );
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    let b = rpce_env(
        &["experiment", "cfg.json", "--out", "b", "--tsv"],
        dir.path(),
        "1",
    );
    assert!(b.status.success());
    for f in ["replicates.csv", "summary.json", "curves.tsv"] {
        let x = std::fs::read(dir.path().join("a").join(f)).unwrap();
        let y = std::fs::read(dir.path().join("b").join(f)).unwrap();
        assert_eq!(x, y, "{f} differs");
    }
    let csv = std::fs::read_to_string(dir.path().join("a/replicates.csv")).unwrap();
    assert_eq!(
        csv.lines().next().unwrap(),
        "method,M,replicate,err_mean,err_std,rel_l2,N,d_tilde,converged,seconds"
    );
    assert_eq!(csv.lines().count(), 1 + 3 * 2 * 3);
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("a/summary.json")).unwrap())
            .unwrap();
    assert_eq!(summary["provenance"]["seed"], 5);
    assert_eq!(
        summary["provenance"]["config_hash"].as_str().unwrap().len(),
        64
    );
    assert!(summary["cells"][0]["err_mean"]["q25"].is_number());
}

#[test]
fn bad_config_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("cfg.json"),
        SMALL.replace("\"seed\": 5", "\"seed\": 5, \"colour\": 1"),
    )
    .unwrap();
    let out = rpce(&["experiment", "cfg.json", "--out", "o"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("colour"));
    assert_eq!(
        rpce(&["experiment", "missing.json"], dir.path())
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        rpce_env(&["experiment", "cfg.json"], dir.path(), "zero")
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn failure_quota_exits_with_four() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = SMALL
        .replace("[24, 40]", "[1]")
        .replace("\"mc\", \"l1\", \"adm\"", "\"l1\"");
    std::fs::write(dir.path().join("cfg.json"), cfg).unwrap();
    let out = rpce(&["experiment", "cfg.json", "--out", "o"], dir.path());
    assert_eq!(out.status.code(), Some(4));
    assert!(dir.path().join("o/summary.json").exists());
}

#[test]
fn fit_then_eval() {
    let dir = tempfile::tempdir().unwrap();
    let mut text = String::from("x1,x2,u\n");
    let mut points = String::from("x1,x2\n");
    let f = |a: f64, b: f64| 1.0 + 2.0 * a - b;
    let mut want = Vec::new();
    for k in 0..40 {
        let a = ((k * 37) % 17) as f64 / 8.0 - 1.0;
        let b = ((k * 11) % 13) as f64 / 6.0 - 1.0;
        text.push_str(&format!("{a},{b},{}\n", f(a, b)));
        if k < 3 {
            points.push_str(&format!("{},{}\n", b, a));
            want.push(f(b, a));
        }
    }
    std::fs::write(dir.path().join("s.csv"), text).unwrap();
    std::fs::write(dir.path().join("p.csv"), points).unwrap();
    let out = rpce(
        &[
            "fit",
            "--samples",
            "s.csv",
            "--out",
            "m.json",
            "--method",
            "l1",
            "--order",
            "2",
        ],
        dir.path(),
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let out = rpce(
        &["eval", "--model", "m.json", "--points", "p.csv"],
        dir.path(),
    );
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let vals: Vec<f64> = text.lines().skip(1).map(|l| l.parse().unwrap()).collect();
    assert_eq!(vals.len(), 3);
    for (v, w) in vals.iter().zip(&want) {
        assert!((v - w).abs() < 1e-3, "{vals:?} vs {want:?}");
    }
    assert_eq!(
        rpce(
            &["eval", "--model", "s.csv", "--points", "p.csv"],
            dir.path()
        )
        .status
        .code(),
        Some(2)
    );
}
