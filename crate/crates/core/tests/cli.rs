//! End-to-end behaviour of the `spg` binary: exit codes, outputs, overrides.

use std::path::Path;
use std::process::{Command, Output};

fn spg(args: &[&str], out_root: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_spg"));
    cmd.args(args).env_remove("SPG_OUT_DIR");
    if let Some(root) = out_root {
        cmd.env("SPG_OUT_DIR", root);
    }
    cmd.output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn csv_rows(path: &Path) -> usize {
    std::fs::read_to_string(path).unwrap().lines().count() - 1
}

const RISKY_MDP: &str = "horizon = 3
transition = [[[0.97, 0.03], [0.5, 0.5]], [[0.0, 1.0], [0.0, 1.0]]]
reward = [0.0, 1.0]
safe = [true, false]
initial = [1.0, 0.0]
";

#[test]
fn help_and_unknown_config() {
    assert_eq!(code(&spg(&["--help"], None)), 0);
    let o = spg(&["train", "no-such-config"], None);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("no-such-config"));
}

#[test]
fn train_episode_override_writes_that_many_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("paper");
    let o = spg(&["train", "nav-paper", "--episodes", "10", "--seed", "4", "--out", out.to_str().unwrap()], None);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(csv_rows(&out.join("seed-4/metrics.csv")), 10);
    assert!(out.join("seed-4/checkpoint.json").exists());
    assert!(out.join("manifest.json").exists());
    assert!(out.join("config.toml").exists());
    let header = std::fs::read_to_string(out.join("seed-4/metrics.csv")).unwrap();
    assert!(header.starts_with("episode,return,safe,avg_return,avg_safety,lambda\n"));
}

#[test]
fn output_root_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let o = spg(&["train", "oracle-small", "--episodes", "5", "--seed", "0"], Some(dir.path()));
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(csv_rows(&dir.path().join("runs/oracle-small/seed-0/metrics.csv")), 5);
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["a", "b"] {
        let out = dir.path().join(name);
        assert_eq!(code(&spg(&["train", "nav-quick-ac", "--episodes", "50", "--seed", "2", "--out", out.to_str().unwrap()], None)), 0);
    }
    for file in ["seed-2/metrics.csv", "seed-2/checkpoint.json"] {
        assert_eq!(std::fs::read(dir.path().join("a").join(file)).unwrap(), std::fs::read(dir.path().join("b").join(file)).unwrap(), "{file}");
    }
}

#[test]
fn evaluate_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("train");
    assert_eq!(code(&spg(&["train", "oracle-small", "--episodes", "200", "--seed", "1", "--out", out.to_str().unwrap()], None)), 0);
    let ck = out.join("seed-1/checkpoint.json");
    let eval_out = dir.path().join("eval");
    let o = spg(&["evaluate", ck.to_str().unwrap(), "--episodes", "30", "--start", "env", "--out", eval_out.to_str().unwrap()], None);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(csv_rows(&eval_out.join("evaluation.csv")), 30);

    std::fs::write(dir.path().join("broken.json"), "{}").unwrap();
    assert_eq!(code(&spg(&["evaluate", dir.path().join("broken.json").to_str().unwrap()], None)), 2);
}

#[test]
fn sweep_grid_sizes() {
    let dir = tempfile::tempdir().unwrap();
    let base = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/configs/oracle-small.toml")).unwrap();

    let empty = dir.path().join("empty.toml");
    std::fs::write(&empty, format!("{base}\n[sweep]\nprob_weights = []\ncumulative_weights = []\n")).unwrap();
    let o = spg(&["sweep", empty.to_str().unwrap(), "--out", dir.path().join("e").to_str().unwrap()], None);
    assert_eq!(code(&o), 2);

    let one = dir.path().join("one.toml");
    std::fs::write(&one, format!("{base}\n[sweep]\nprob_weights = [1.0]\ncumulative_weights = []\nruns = 1\n")).unwrap();
    let out = dir.path().join("one");
    let o = spg(&["sweep", one.to_str().unwrap(), "--episodes", "100", "--out", out.to_str().unwrap()], None);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert_eq!(text.lines().count(), 2);
    assert!(text.starts_with("method,weight,run,eval_return,eval_safety,lambda_final,bound_upper\nprob-spg-reinforce,1.0,0,"));
    assert!(text.trim_end().ends_with(','), "probabilistic rows leave bound_upper empty");
}

#[test]
fn config_with_unknown_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let base = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/configs/oracle-small.toml")).unwrap();
    let path = dir.path().join("typo.toml");
    std::fs::write(&path, base.replace("eta_theta", "eta_thetta")).unwrap();
    let o = spg(&["train", path.to_str().unwrap(), "--out", dir.path().join("x").to_str().unwrap()], None);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("eta_thetta"));
}

#[test]
fn checks_on_custom_and_tampered_mdps() {
    let dir = tempfile::tempdir().unwrap();
    let good = dir.path().join("risky.toml");
    std::fs::write(&good, RISKY_MDP).unwrap();
    let out = dir.path().join("oracle");
    let o = spg(&["oracle-check", "--mdp", good.to_str().unwrap(), "--out", out.to_str().unwrap()], None);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    assert!(String::from_utf8_lossy(&o.stdout).contains("PASS"));
    assert!(out.join("manifest.json").exists());

    let o = spg(&["variance-check", "--mdp", good.to_str().unwrap(), "--out", dir.path().join("var").to_str().unwrap()], None);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));

    let o = spg(&["bound-check", "--mdp", good.to_str().unwrap(), "--grid-steps", "20", "--delta", "0.4", "--out", dir.path().join("bound").to_str().unwrap()], None);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    assert!(dir.path().join("bound/certificate-risky.toml").exists());

    // Row (0, 0) no longer sums to one.
    let bad = dir.path().join("tampered.toml");
    std::fs::write(&bad, RISKY_MDP.replace("[0.97, 0.03]", "[0.97, 0.3]")).unwrap();
    let o = spg(&["oracle-check", "--mdp", bad.to_str().unwrap(), "--out", dir.path().join("bad").to_str().unwrap()], None);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("tampered.toml"));
}
