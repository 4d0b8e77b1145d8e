//! Runs the `hplk` binary end to end.

use std::process::{Command, Output};

use hplk_core::io::{read_portrait_binary, CSV_HEADER};

fn hplk(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hplk")).args(args).env_remove("HPLK_THREADS").output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn portrait_csv_is_deterministic() {
    let args = ["portrait", "--omega", "2", "--b", "-2:2:5", "--a", "0:2:3", "--threads", "2"];
    let first = hplk(&args);
    assert_eq!(first.status.code(), Some(0), "{}", String::from_utf8_lossy(&first.stderr));
    let text = stdout(&first);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], CSV_HEADER);
    assert_eq!(lines[2], "B,A,rho,uncertainty,locked,converged,boundary");
    assert_eq!(lines.len(), 3 + 15);
    assert_eq!(stdout(&hplk(&args)), text);
}

#[test]
fn portrait_binary_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("p.bin");
    let o = hplk(&["portrait", "--omega", "2", "--b", "-1:1:3", "--a", "0.5:1:2", "--format", "bin", "--out", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let p = read_portrait_binary(std::fs::File::open(&path).unwrap()).unwrap();
    assert_eq!((p.grid.b.n, p.grid.a.n), (3, 2));
    // B = 0 is locked at ρ = 0 for every A.
    assert!(p.locked[p.index(1, 0)] && p.rho[p.index(1, 1)] == 0.0);
}

#[test]
fn config_file_and_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "# point\nomega = 2\nb = 1.1\na = 1.0\n").unwrap();
    let from_file = hplk(&["rotnum", "--config", cfg.to_str().unwrap()]);
    assert_eq!(from_file.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&from_file)).unwrap();
    assert_eq!(v["b"], 1.1);
    assert!(!v["locked"].as_bool().unwrap());
    let overridden = hplk(&["rotnum", "--config", cfg.to_str().unwrap(), "--b", "0.2"]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&overridden)).unwrap();
    assert_eq!(v["b"], 0.2);
    assert_eq!(v["rho"], 0.0);
}

#[test]
fn configuration_errors_exit_with_two() {
    assert_eq!(hplk(&["rotnum", "--omega", "-1", "--b", "1", "--a", "1"]).status.code(), Some(2));
    assert_eq!(hplk(&["portrait", "--omega", "1", "--b", "1:0:3", "--a", "0:1:2"]).status.code(), Some(2));
    assert_eq!(hplk(&["rotnum", "--b", "1", "--a", "1"]).status.code(), Some(2));
    assert_eq!(hplk(&["xi", "--l", "-2", "--lambda", "1", "--mu", "0.5"]).status.code(), Some(2));
    assert_eq!(hplk(&["boundary", "--omega", "1", "--eq", "nope", "--b", "0:1:3", "--a", "1:2:2"]).status.code(), Some(2));
    let bad_env = Command::new(env!("CARGO_BIN_EXE_hplk"))
        .args(["polydet", "--l", "2", "--mu", "1"])
        .env("HPLK_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(bad_env.status.code(), Some(2));
}

#[test]
fn rotation_that_cannot_converge_exits_with_four() {
    let o = hplk(&["rotnum", "--omega", "2", "--b", "1.1", "--a", "1", "--tol", "1e-15", "--method", "birkhoff"]);
    assert_eq!(o.status.code(), Some(4), "{}", stdout(&o));
}

#[test]
fn polydet_and_curves() {
    let o = hplk(&["polydet", "--l", "3", "--mu", "0.5"]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["lambda_roots"].as_array().unwrap().len(), 3);
    let o = hplk(&["boundary", "--omega", "1", "--eq", "e0", "--sign", "minus", "--b", "-0.5:3:71", "--a", "1:2:3"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert_eq!(text.lines().nth(1), Some("A,B,equation,sign,residual"));
    assert!(text.lines().skip(2).all(|l| l.contains(",e0,minus,")));
}

#[test]
fn adjacencies_are_verified() {
    let o = hplk(&["adjacencies", "--omega", "2", "--l", "0", "--mu", "0.001:2.5:250", "--format", "csv"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let rows: Vec<&str> = text.lines().skip(2).collect();
    assert_eq!(rows.len(), 1);
    let a: f64 = rows[0].split(',').nth(2).unwrap().parse().unwrap();
    assert!((a - 4.952690114913).abs() < 1e-8, "{a}");
}
