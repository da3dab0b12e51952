use std::path::Path;
use std::process::{Command, Output};

fn lab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lab-cli"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn generate_then_scan() {
    let dir = tempfile::tempdir().unwrap();
    let set = dir.path().join("tq.txt");
    let o = lab(&["generate", "--pattern", "three-quadrant", "--scale", "3", "--out", p(&set)]);
    assert!(o.status.success());
    let text = std::fs::read_to_string(&set).unwrap();
    assert!(text.starts_with("grid 2 3\n0 0\n"));
    assert_eq!(text.lines().count(), 28);

    let o = lab(&["pinned-scan", p(&set), "--t", "0.5", "--pins", "all", "--format", "csv"]);
    assert!(o.status.success());
    let out = stdout(&o);
    assert!(out.starts_with("index,x,y,count,exceptional\n"));
    assert_eq!(out.lines().count(), 28);

    let o = lab(&["pinned-scan", p(&set), "--t", "0.5", "--pins", "5", "--seed", "2"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["pins_scanned"], 5);
    assert_eq!(v["sampled"], true);

    let o = lab(&["dist-count", p(&set), p(&set)]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["scale"], 3);

    let o = lab(&["conical", p(&set), "--beta", "0.4", "--rmin", "0.25", "--s", "1.58", "--kappa", "0.1", "--pins", "all"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["scan"]["pins_scanned"], 27);
    assert!(v["exceptional"]["within_bound"].is_boolean());
}

#[test]
fn measure_commands() {
    let dir = tempfile::tempdir().unwrap();
    let mu = dir.path().join("mu.txt");
    std::fs::write(&mu, "measure 2 2\n0 0 0.5\n3 3 0.25\n1 2 0.25\n").unwrap();
    let o = lab(&["entropy", p(&mu), "--k", "1,2", "--format", "csv"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o), "k,entropy,normalized\n1,1.5,1.5\n2,1.5,0.75\n");

    let cantor = dir.path().join("c.txt");
    assert!(lab(&["generate", "--pattern", "three-quadrant", "--scale", "6", "--measure", "--out", p(&cantor)])
        .status
        .success());
    let o = lab(&["scenery", p(&cantor), "--q", "2", "--format", "csv"]);
    assert!(o.status.success());
    let out = stdout(&o);
    let header = out.lines().next().unwrap();
    assert!(header.starts_with("atom,weight,entropy,proj_0.000000,"));
    // self-similar: a single atom with weight 1
    assert_eq!(out.lines().count(), 2);

    let o = lab(&["verify-regular", p(&cantor), "--s", "1.584962500721156"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(v["C_star"].as_f64().unwrap() >= 1.0);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.txt");
    std::fs::write(&bad, "grid 2 3\n1 1\n9 0\n").unwrap();
    let o = lab(&["pinned-scan", p(&bad), "--t", "0.5"]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8(o.stderr).unwrap();
    assert!(err.contains("line 3"), "{err}");

    // the Katz-Tao scaling ratios drift by more than 2x over these scales
    let o = lab(&["experiment", "katz-tao", "--scales", "4,6,8,10"]);
    assert_eq!(o.status.code(), Some(1));

    let o = lab(&["experiment", "theorem11", "--pattern", "three-quadrant", "--scales", "5,6", "--t", "0.85"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["id"], "theorem11");
    assert!(v["verdicts"].as_array().unwrap().iter().all(|r| r["verdict"] == "pass"));

    let missing = dir.path().join("nope.json");
    let o = lab(&["experiment", "inequalities", "--constants", p(&missing)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8(o.stderr).unwrap().contains("lab-cli calibrate"));

    let o = lab(&["pinned-scan", p(&bad), "--t", "0.5", "--pins", "many"]);
    assert_eq!(o.status.code(), Some(2));
}
