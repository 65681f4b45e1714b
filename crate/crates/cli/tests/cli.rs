use std::fs;
use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_capillary"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn verify_is_byte_identical_across_runs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [&a, &b] {
        let o = run(&[
            "verify",
            "--seed",
            "11",
            "--theta",
            "pi/3",
            "--samples",
            "20000",
            "--out",
            dir.path().to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    }
    let ra = fs::read(a.path().join("verification_report.json")).unwrap();
    let rb = fs::read(b.path().join("verification_report.json")).unwrap();
    assert_eq!(ra, rb);
    let v: Value = serde_json::from_slice(&ra).unwrap();
    for key in ["config", "checks", "tables", "version"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
    assert!(a.path().join("volume_products.csv").exists());
    // no temporary files left behind
    assert!(fs::read_dir(a.path())
        .unwrap()
        .all(|e| !e.unwrap().file_name().to_string_lossy().ends_with(".tmp")));
}

#[test]
fn obtuse_verify_is_a_config_error() {
    let d = tempfile::tempdir().unwrap();
    let o = run(&["verify", "--seed", "1", "--theta", "2pi/3", "--out", d.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("acute"), "{err}");
    assert!(!d.path().join("verification_report.json").exists());
}

#[test]
fn monte_carlo_commands_need_a_seed() {
    let d = tempfile::tempdir().unwrap();
    assert_eq!(run(&["verify", "--out", d.path().to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(run(&["linearized", "--out", d.path().to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn ball_volume_product_has_positive_margin() {
    let d = tempfile::tempdir().unwrap();
    let o = run(&[
        "volume-product",
        "--body",
        "ball",
        "--body",
        r#"{"kind":"box","dim":2,"params":{"half_widths":[1,3]}}"#,
        "--theta",
        "pi/3",
        "--out",
        d.path().to_str().unwrap(),
        "--format",
        "json,csv,svg",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let csv = fs::read_to_string(d.path().join("volume_products.csv")).unwrap();
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let col = header.iter().position(|h| *h == "margin").unwrap();
    let rows: Vec<f64> = lines.map(|l| l.split(',').nth(col).unwrap().parse().unwrap()).collect();
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|m| *m > 1e-3), "{rows:?}");
    assert!(d.path().join("volume_product_margins.svg").exists());
}

#[test]
fn unknown_body_and_bad_angle_exit_two() {
    let d = tempfile::tempdir().unwrap();
    let out = d.path().to_str().unwrap();
    assert_eq!(run(&["volume-product", "--body", "torus", "--out", out]).status.code(), Some(2));
    assert_eq!(
        run(&["volume-product", "--body", "ball", "--theta", "sixty", "--out", out]).status.code(),
        Some(2)
    );
    assert_eq!(run(&["example1", "--theta", "pi/3", "--out", out]).status.code(), Some(2));
}

#[test]
fn example_families_diverge() {
    let d = tempfile::tempdir().unwrap();
    let out = d.path().to_str().unwrap();
    let o = run(&["example2", "--out", out, "--format", "json,csv,svg"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let text = stdout(&o);
    assert!(text.contains("strictly increasing: yes"));
    let v: Value =
        serde_json::from_str(&fs::read_to_string(d.path().join("example2_report.json")).unwrap()).unwrap();
    let slope = v["tables"]["example2"]["slope"].as_f64().unwrap();
    assert!(slope >= 0.8, "{slope}");
    assert!(d.path().join("example2.svg").exists());

    let o = run(&["example1", "--out", out]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).contains("fitted log-log slope"));
    assert!(d.path().join("example1.csv").exists());
}

#[test]
fn linearized_margins_are_nonnegative() {
    let d = tempfile::tempdir().unwrap();
    let o = run(&[
        "linearized",
        "--seed",
        "5",
        "--theta",
        "pi/4,pi/2",
        "--count",
        "10",
        "--out",
        d.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let csv = fs::read_to_string(d.path().join("linearized.csv")).unwrap();
    let margins: Vec<f64> = csv
        .lines()
        .skip(1)
        .map(|l| l.rsplit(',').next().unwrap().parse().unwrap())
        .collect();
    assert_eq!(margins.len(), 20);
    assert!(margins.iter().all(|m| *m >= -1e-7));
    let sv = fs::read_to_string(d.path().join("second_variation.csv")).unwrap();
    assert_eq!(sv.lines().count(), 1 + 2 * 5);
}
