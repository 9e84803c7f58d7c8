mod common;

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use common::*;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_graphcond"));
    c.env("RUST_LOG", "info");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("graphcond-cli-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_reference_graph(dir: &Path) -> PathBuf {
    let path = dir.join("reference.graph");
    std::fs::write(&path, reference_graph().to_text()).unwrap();
    path
}

#[test]
fn no_arguments_is_a_usage_error() {
    let o = run(&[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("Usage"));
}

#[test]
fn unknown_flag_is_a_usage_error() {
    assert_eq!(run(&["homogenize", "--frobnicate"]).status.code(), Some(2));
}

#[test]
fn homogenize_prints_the_reference_graph_conductance() {
    let dir = scratch("homogenize");
    let g = write_reference_graph(&dir);
    for solver in ["full-direct", "laplacian-cg"] {
        let o = run(&["homogenize", "--graph", s(&g), "--solver", solver]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        let out = String::from_utf8(o.stdout).unwrap();
        let v: f64 = out
            .trim()
            .strip_prefix("conductance ")
            .unwrap()
            .parse()
            .unwrap();
        assert!((v - 0.1071758991572).abs() <= 1e-10, "{v}");
    }
}

#[test]
fn missing_input_fails_and_names_the_path() {
    let dir = scratch("missing");
    let ghost = dir.join("no-such-sample.txt");
    let o = run(&["tensor", "--sample", s(&ghost)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("no-such-sample.txt"), "{}", stderr(&o));
}

#[test]
fn graph_file_given_to_voxel_is_a_usage_error() {
    let dir = scratch("voxel-graph");
    let g = write_reference_graph(&dir);
    let o = run(&["voxel", "--sample", s(&g)]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    let o = run(&["voxel", "--raw", s(&g), "--dims", "2,2,2"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn failed_run_leaves_no_output_file() {
    let dir = scratch("no-partial");
    let bad = dir.join("bad.sample");
    std::fs::write(&bad, "graphcond-sample 1\ncell 1 1 1\nsphere 0.5 0.5\n").unwrap();
    let out = dir.join("tensor.txt");
    let o = run(&["tensor", "--sample", s(&bad), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    assert!(!out.exists());
    let leftovers: Vec<_> = std::fs::read_dir(&dir)
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    assert_eq!(leftovers.len(), 1, "{leftovers:?}");
}

#[test]
fn invalid_config_is_a_usage_error() {
    let dir = scratch("bad-config");
    let cfg = dir.join("run.toml");
    std::fs::write(
        &cfg,
        "config_version = 1\n[generation]\nvolume_fractoin = 0.2\n",
    )
    .unwrap();
    let o = run(&["--config", s(&cfg), "generate", "--out", s(&dir.join("x"))]);
    assert_eq!(o.status.code(), Some(2));
    std::fs::write(&cfg, "[generation]\nvolume_fraction = 0.2\n").unwrap();
    let o = run(&["--config", s(&cfg), "generate", "--out", s(&dir.join("x"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("config_version"), "{}", stderr(&o));
}

#[test]
fn repeated_flag_warns_and_last_wins() {
    let dir = scratch("duplicate");
    let a = dir.join("a.sample");
    let b = dir.join("b.sample");
    let o = run(&[
        "generate",
        "--out",
        s(&a),
        "--seed",
        "1",
        "--seed",
        "7",
        "--no-puff",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(
        stderr(&o).contains("--seed given more than once"),
        "{}",
        stderr(&o)
    );
    let o = run(&["generate", "--out", s(&b), "--seed", "7", "--no-puff"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn small_campaign_writes_one_row_per_point() {
    let dir = scratch("campaign");
    let cfg = dir.join("run.toml");
    std::fs::write(
        &cfg,
        "config_version = 1\n\
         [generation]\nn_spheres = 20\nn_cylinders = 10\n\
         [campaign]\nsweep_variable = \"cylinder-share\"\nsweep_values = [0.25, 0.75]\nn_samples = 2\nfraction_probes = 500\n",
    )
    .unwrap();
    let out = dir.join("campaign.csv");
    let records = dir.join("records.csv");
    let o = run(&[
        "--config",
        s(&cfg),
        "campaign",
        "--out",
        s(&out),
        "--records",
        s(&records),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = std::fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().count(), 3, "{text}");
    assert_eq!(
        std::fs::read_to_string(&records).unwrap().lines().count(),
        5
    );
}

#[test]
fn saved_config_reproduces_the_run() {
    let dir = scratch("reproduce");
    let first = dir.join("first.sample");
    let second = dir.join("second.sample");
    let saved = dir.join("effective.toml");
    let o = run(&[
        "generate",
        "--out",
        s(&first),
        "--seed",
        "11",
        "--volume-fraction",
        "0.13",
        "--cylinder-share",
        "0.3",
        "--n-spheres",
        "30",
        "--n-cylinders",
        "12",
        "--save-config",
        s(&saved),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let echoed = std::fs::read_to_string(&saved).unwrap();
    assert!(stderr(&o).contains(echoed.lines().find(|l| l.starts_with("seed")).unwrap()));
    let o = run(&["--config", s(&saved), "generate", "--out", s(&second)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(
        std::fs::read(&first).unwrap(),
        std::fs::read(&second).unwrap()
    );
}

#[test]
fn generated_sample_feeds_tensor_and_voxel() {
    let dir = scratch("pipeline");
    let sample = dir.join("s.sample");
    let o = run(&["generate", "--out", s(&sample), "--seed", "2"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let o = run(&["tensor", "--sample", s(&sample)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(String::from_utf8(o.stdout).unwrap().lines().count(), 6);
    let o = run(&["voxel", "--sample", s(&sample), "--resolution", "12"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(String::from_utf8(o.stdout).unwrap().lines().count(), 3);
    // a sample is not a graph
    let o = run(&["homogenize", "--graph", s(&sample)]);
    assert_eq!(o.status.code(), Some(2));
}
