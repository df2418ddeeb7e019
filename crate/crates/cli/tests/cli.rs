//! Exit codes and results folders of the `cultsim` binary.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::{Command, Output};

fn cultsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cultsim")).args(args).output().unwrap()
}

fn files(root: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.insert(path.strip_prefix(root).unwrap().display().to_string(), std::fs::read(&path).unwrap());
            }
        }
    }
    out
}

#[test]
fn run_writes_one_folder_per_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("demo");
    let o = cultsim(&[
        "run", "--agents", "10", "--generations", "10", "--seeds", "5", "--network", "fully_connected",
        "--transform", "CombineTwo", "--backend", "mock:echo", "--out", out.to_str().unwrap(), "--quiet",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let printed = String::from_utf8(o.stdout).unwrap();
    assert_eq!(printed.trim(), out.join("summary_metrics.json").display().to_string());
    for s in 0..5 {
        assert!(out.join(format!("seed_{s}/stories.json")).is_file());
    }
    assert!(!out.join("seed_5").exists());
}

#[test]
fn caveman_is_persisted() {
    let tmp = tempfile::tempdir().unwrap();
    let o = cultsim(&[
        "run", "--network", "caveman", "--cliques", "2", "--agents", "10", "--generations", "2",
        "--backend", "mock:templated", "--out", tmp.path().to_str().unwrap(), "--quiet",
    ]);
    assert!(o.status.success());
    let config: serde_json::Value =
        serde_json::from_slice(&std::fs::read(tmp.path().join("config.json")).unwrap()).unwrap();
    assert_eq!(config["topology"], serde_json::json!({ "kind": "caveman", "n_cliques": 2 }));
    let topology: serde_json::Value =
        serde_json::from_slice(&std::fs::read(tmp.path().join("topology.json")).unwrap()).unwrap();
    assert_eq!(topology["edges"].as_array().unwrap().len(), 20);
}

#[test]
fn invalid_flags_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().to_str().unwrap();
    let indivisible = cultsim(&["run", "--agents", "10", "--network", "caveman", "--cliques", "3", "--backend", "mock:echo", "--out", dir]);
    assert_eq!(indivisible.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&indivisible.stderr).contains("cannot be split evenly"));
    assert!(!tmp.path().join("config.json").exists());
    for args in [
        &["run", "--backend", "mock:nope"][..],
        &["run", "--backend", "http:not a url"],
        &["run", "--backend", "mock:echo", "--network", "star"],
        &["run", "--backend", "mock:echo", "--agents", "zero"],
        &["run", "--backend", "mock:echo", "--transform", "Unknown"],
        &["run"],
    ] {
        assert_eq!(cultsim(args).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn unreachable_backend_exits_1_naming_the_failure() {
    let tmp = tempfile::tempdir().unwrap();
    let port = std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let url = format!("http:http://127.0.0.1:{port}/v1/completions");
    let o = cultsim(&[
        "run", "--agents", "3", "--generations", "2", "--network", "circle", "--backend", &url, "--retries", "0",
        "--parallelism", "1", "--out", tmp.path().to_str().unwrap(), "--quiet",
    ]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("seed 0, generation 0, agent"), "{err}");
    let status: serde_json::Value =
        serde_json::from_slice(&std::fs::read(tmp.path().join("seed_0/status.json")).unwrap()).unwrap();
    assert_eq!(status["status"], "failed");
}

#[test]
fn analyze_reproduces_and_repairs() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().to_str().unwrap();
    let o = cultsim(&[
        "run", "--agents", "4", "--generations", "3", "--seeds", "2", "--network", "circle",
        "--backend", "mock:concat:20", "--out", dir, "--quiet",
    ]);
    assert!(o.status.success());
    let before = files(tmp.path());
    assert!(cultsim(&["analyze", dir]).status.success());
    assert_eq!(files(tmp.path()), before);
    std::fs::remove_file(tmp.path().join("seed_1/metrics.json")).unwrap();
    assert!(cultsim(&["analyze", dir]).status.success());
    assert_eq!(files(tmp.path()), before);
}

#[test]
fn analyze_empty_or_corrupt_exits_1() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(cultsim(&["analyze", tmp.path().to_str().unwrap()]).status.code(), Some(1));
    let dir = tmp.path().to_str().unwrap();
    assert!(cultsim(&["run", "--agents", "3", "--generations", "2", "--network", "circle", "--backend", "mock:echo", "--out", dir, "-q"])
        .status
        .success());
    std::fs::write(tmp.path().join("seed_0/stories.json"), "[{").unwrap();
    assert_eq!(cultsim(&["analyze", dir]).status.code(), Some(1));
}
