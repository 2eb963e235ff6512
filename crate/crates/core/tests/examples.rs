//! Runs every example with small arguments and checks it exits cleanly.

use std::path::PathBuf;
use std::process::Command;

fn example(name: &str) -> PathBuf {
    // tests run from target/<profile>/deps; examples live in target/<profile>/examples.
    let exe = std::env::current_exe().unwrap();
    let dir = exe.parent().unwrap().parent().unwrap().join("examples");
    let path = dir.join(format!("{name}{}", std::env::consts::EXE_SUFFIX));
    assert!(path.exists(), "{} not built; run through `cargo test`", path.display());
    path
}

fn run(name: &str, args: &[&str]) -> String {
    let out = Command::new(example(name)).args(args).output().unwrap();
    assert!(out.status.success(), "{name} failed:\n{}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn gradient_identity() {
    let out = run("gradient_identity", &[]);
    assert_eq!(out.lines().count(), 12);
}

#[test]
fn variance_ordering() {
    let out = run("variance_ordering", &[]);
    assert!(out.starts_with("instance"));
}

#[test]
fn bound_certificate() {
    let out = run("bound_certificate", &["risky-goal", "0.1"]);
    assert!(out.contains("theorem-1 sandwich: true, corollary-1 sandwich: true"), "{out}");
}

#[test]
fn oracle_primal_dual() {
    let out = run("oracle_primal_dual", &[]);
    assert_eq!(out.lines().count(), 4);
}

#[test]
fn nav_primal_dual() {
    let out = run("nav_primal_dual", &["200", "actor-critic", "1"]);
    assert!(out.contains("critic H1") && out.contains("evaluation from uniform safe starts"), "{out}");
}

#[test]
fn single_obstacle_gated() {
    let out = run("single_obstacle_gated", &["100"]);
    assert_eq!(out.lines().filter(|l| l.starts_with("start (")).count(), 4);
}

#[test]
fn critic_grid() {
    let out = run("critic_grid", &["100"]);
    let mut lines = out.lines();
    assert_eq!(lines.next(), Some("x,y,p_hat,safe"));
    assert_eq!(lines.count(), 51 * 51);
}

#[test]
fn trajectory_dump() {
    let out = run("trajectory_dump", &["50", "2"]);
    // 4 starts x 2 rollouts x 21 states.
    assert_eq!(out.lines().count(), 1 + 4 * 2 * 21);
}

#[test]
fn tradeoff_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let out = run("tradeoff_sweep", &["20", dir.path().to_str().unwrap()]);
    assert_eq!(out.lines().filter(|l| l.starts_with("prob-spg") || l.starts_with("cumulative")).count(), 16);
    assert!(dir.path().join("sweep.csv").exists());
}

#[test]
fn checkpoint_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let out = run("checkpoint_roundtrip", &[dir.path().to_str().unwrap()]);
    assert!(out.contains("restored bit-exactly"), "{out}");
}
