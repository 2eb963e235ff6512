//! Fits the sigmoid safety critic during SPG-Actor-Critic training, then writes
//! `P̂(s, 0)` on a lattice over the map as CSV (`x,y,p_hat,safe`).
//!
//! ```text
//! cargo run --release --example critic_grid -- [episodes] > critic.csv
//! ```

use std::io::Write;

use safe_pg::env::{NavEnvSpec, StartDistribution};
use safe_pg::estimators::SafetyCritic;
use safe_pg::policy::GaussianRbfPolicy;
use safe_pg::trainers::{train, DualRollout, Method, TrainerConfig};

fn main() -> anyhow::Result<()> {
    let episodes: u64 = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(2_000);
    let env = NavEnvSpec { start: StartDistribution::Fixed { points: NavEnvSpec::reference_starts() }, ..NavEnvSpec::five_obstacles() };
    let config = TrainerConfig {
        method: Method::ProbSpgActorCritic,
        eta_theta: 0.02,
        eta_lambda: 0.002,
        penalty: 0.0,
        delta: 0.05,
        episodes,
        seed: 0,
        clip_norm: Some(1e3),
        dual_rollout: DualRollout::Reuse,
    };
    let mut critic = SafetyCritic::default();
    train(&config, &env, GaussianRbfPolicy::paper_default(), &mut critic)?;
    eprintln!("critic after {episodes} episodes: H1 {:.4}, H2 {:.4}", critic.h1, critic.h2);

    let stdout = std::io::stdout();
    let mut out = std::io::BufWriter::new(stdout.lock());
    writeln!(out, "x,y,p_hat,safe")?;
    for i in 0..=50 {
        for j in 0..=50 {
            let s = [i as f64 * 0.2, j as f64 * 0.2];
            writeln!(out, "{},{},{},{}", s[0], s[1], critic.estimate(&env, s, [0.0, 0.0]), env.is_safe_state(s) as u8)?;
        }
    }
    Ok(())
}
