//! Fixed-penalty sweep over both constraint formulations on the navigation
//! task, printing the mean evaluated (safety, return) per weight.
//!
//! ```text
//! cargo run --release --example tradeoff_sweep -- [episodes] [out-dir]
//! ```

use std::path::PathBuf;

use safe_pg::harness::{cmd_sweep, ExperimentConfig, Overrides};

fn main() -> anyhow::Result<()> {
    let mut args = std::env::args().skip(1);
    let episodes: u64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(2_000);
    let out = args.next().map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("spg-tradeoff-sweep"));

    let config = ExperimentConfig::builtin("nav-sweep").expect("builtin config");
    let report = cmd_sweep(&config, None, &Overrides { seed: None, episodes: Some(episodes), out: Some(out) })?;

    println!("{:<22} {:>8} {:>8} {:>12} {:>12}", "method", "weight", "safety", "return/step", "bound/step");
    let steps = 21.0;
    let mut i = 0;
    while i < report.rows.len() {
        let head = &report.rows[i];
        let group: Vec<_> = report.rows[i..].iter().take_while(|r| r.method == head.method && r.weight == head.weight).collect();
        let n = group.len() as f64;
        let safety = group.iter().map(|r| r.eval_safety).sum::<f64>() / n;
        let ret = group.iter().map(|r| r.eval_return).sum::<f64>() / n;
        let bound = group.iter().filter_map(|r| r.bound_upper).sum::<f64>() / n;
        let bound = if head.bound_upper.is_some() { format!("{:12.3}", bound / steps) } else { format!("{:>12}", "-") };
        println!("{:<22} {:>8.1} {:>8.3} {:>12.3} {bound}", head.method.as_str(), head.weight, safety, ret / steps);
        i += group.len();
    }
    println!("rows in {}", report.csv.display());
    Ok(())
}
