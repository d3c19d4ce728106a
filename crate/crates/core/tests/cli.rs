use std::path::Path;
use std::process::{Command, Output};

fn cmlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cmlab")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn write_degrees(dir: &Path, n: &str, cf: &str) -> String {
    let path = dir.join(format!("d{n}.txt"));
    let o = cmlab(&["gen-degrees", "--n", n, "--tau", "3.5", "--cf", cf, "--out", path.to_str().unwrap()]);
    assert!(o.status.success());
    path.to_str().unwrap().to_string()
}

#[test]
fn gen_degrees_contract() {
    let o = cmlab(&["gen-degrees", "--n", "10", "--tau", "3.5", "--cf", "1"]);
    assert_eq!(o.status.code(), Some(0));
    let d: Vec<u32> =
        stdout(&o).lines().filter(|l| !l.starts_with('#')).map(|l| l.trim().parse().unwrap()).collect();
    assert_eq!(d.len(), 10);
    assert!(d.windows(2).all(|w| w[0] >= w[1]));
    assert_eq!(d.iter().sum::<u32>() % 2, 0);
}

#[test]
fn realize_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let d = write_degrees(dir.path(), "200", "1");
    let a = cmlab(&["realize", "--degrees", &d, "--seed", "4"]);
    let b = cmlab(&["realize", "--degrees", &d, "--seed", "4"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let c = cmlab(&["realize", "--degrees", &d, "--seed", "5"]);
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn graph_commands_chain() {
    let dir = tempfile::tempdir().unwrap();
    let d = write_degrees(dir.path(), "300", "2");
    let g = dir.path().join("g.txt");
    let o = cmlab(&["realize", "--degrees", &d, "--seed", "1", "--out", g.to_str().unwrap()]);
    assert!(o.status.success());
    let g = g.to_str().unwrap();

    let t = cmlab(&["explore", "--graph", g, "--start", "1"]);
    assert!(t.status.success());
    let csv = stdout(&t);
    assert!(csv.starts_with("step,S,A,M,QV,discovered_vertex\n"));
    assert!(csv.lines().last().unwrap().split(',').nth(1) == Some("0"));

    let m = cmlab(&["mass", "--graph", g, "--rank", "1", "--deltas", "0.5,1,2"]);
    assert!(m.status.success());
    assert_eq!(stdout(&m).lines().count(), 4);

    let p = cmlab(&["percolate", "--degrees", &d, "--lambda", "-0.5", "--seed", "3"]);
    assert!(p.status.success(), "{}", String::from_utf8_lossy(&p.stderr));
    assert!(stdout(&p).starts_with("# n=300"));

    let s = cmlab(&["realize", "--degrees", &d, "--seed", "1", "--simple", "--max-attempts", "500"]);
    assert!(s.status.code() == Some(0) || s.status.code() == Some(2));
}

#[test]
fn diagnostics_commands() {
    let dir = tempfile::tempdir().unwrap();
    let d = write_degrees(dir.path(), "10000", "1");
    let c = cmlab(&["check-assumptions", "--degrees", &d, "--tau", "3.5"]);
    assert!(c.status.success());
    let v: serde_json::Value = serde_json::from_slice(&c.stdout).unwrap();
    assert!(v.as_array().unwrap().iter().any(|x| x["name"] == "degree_one_fraction"));

    let b = cmlab(&["bp-height", "--degrees", &d, "--eps", "0.1", "--trials", "200", "--seed", "2"]);
    assert!(b.status.success(), "{}", String::from_utf8_lossy(&b.stderr));
    let v: serde_json::Value = serde_json::from_slice(&b.stdout).unwrap();
    assert_eq!(v["violations"], 0);
}

#[test]
fn experiment_smoke() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("minimal.json");
    std::fs::write(&cfg, r#"{"tau": 3.5, "n_list": [100], "trials": 2, "master_seed": 3}"#).unwrap();
    let out = dir.path().join("trials.jsonl");
    let o = cmlab(&["experiment", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let jsonl = std::fs::read_to_string(&out).unwrap();
    assert_eq!(jsonl.lines().count(), 2);
    let summary = std::fs::read_to_string(format!("{}.summary.json", out.display())).unwrap();
    let v: serde_json::Value = serde_json::from_str(&summary).unwrap();
    assert_eq!(v["per_n"][0]["trials"], 2);

    let again = cmlab(&["experiment", "--config", cfg.to_str().unwrap()]);
    assert!(stdout(&again).starts_with(&jsonl));
}

#[test]
fn exit_codes() {
    assert_eq!(cmlab(&["gen-degrees", "--n", "10", "--tau", "3.5", "--bogus"]).status.code(), Some(1));
    assert_eq!(cmlab(&["no-such-command"]).status.code(), Some(1));
    assert_eq!(cmlab(&["--help"]).status.code(), Some(0));
    assert_eq!(cmlab(&["realize", "--degrees", "/nonexistent", "--seed", "1"]).status.code(), Some(2));
    assert_eq!(cmlab(&["gen-degrees", "--n", "10", "--tau", "4.5"]).status.code(), Some(2));
    let bad = cmlab(&["gen-degrees", "--n", "10", "--tau", "3.5", "--bogus"]);
    assert!(String::from_utf8_lossy(&bad.stderr).contains("Usage"));
}
