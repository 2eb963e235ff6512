//! Trains `oracle-small` through the harness, reloads the checkpoint, and checks
//! that the restored parameters are bit-identical and evaluate the same.
//!
//! ```text
//! cargo run --release --example checkpoint_roundtrip -- [out-dir]
//! ```

use std::path::PathBuf;

use safe_pg::harness::{cmd_evaluate, cmd_train, Checkpoint, EvalStart, ExperimentConfig, Overrides};

fn main() -> anyhow::Result<()> {
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("spg-checkpoint-roundtrip"));
    let config = ExperimentConfig::builtin("oracle-small").expect("builtin config");
    let report = cmd_train(&config, None, &Overrides { seed: Some(3), episodes: Some(5_000), out: Some(out.clone()) })?;
    let run = &report.runs[0];
    println!("trained: avg safety {:.4}, lambda {:.4}", run.final_avg_safety, run.final_lambda);

    let path = out.join("seed-3/checkpoint.json");
    let ck = Checkpoint::load(&path)?;
    let (_, policy) = ck.restore()?;
    let again = Checkpoint::new(&ck.env.clone().into(), &ck.policy, &ck.trainer, ck.episode, ck.lambda()?, policy.params());
    assert_eq!(again.to_text(), std::fs::read_to_string(&path)?, "re-saved checkpoint differs");
    println!("{} parameters restored bit-exactly, lambda {:.6}", policy.params().len(), ck.lambda()?);

    let a = cmd_evaluate(&path, 1_000, 0, EvalStart::Env, Some(&out.join("eval-a")))?;
    let b = cmd_evaluate(&path, 1_000, 0, EvalStart::Env, Some(&out.join("eval-b")))?;
    assert_eq!(std::fs::read(&a.csv)?, std::fs::read(&b.csv)?);
    println!("evaluation: mean return {:.4}, safety {:.4} (repeat identical)", a.summary.mean_return, a.summary.safety);
    Ok(())
}
