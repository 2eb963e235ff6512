//! Trains briefly, then dumps sampled trajectories from the four reference
//! starts as CSV (`start,rollout,t,x,y,safe`) for plotting.
//!
//! ```text
//! cargo run --release --example trajectory_dump -- [episodes] [rollouts] > traj.csv
//! ```

use std::io::Write;

use safe_pg::env::{rollout, NavEnvSpec, StartDistribution};
use safe_pg::estimators::SafetyCritic;
use safe_pg::policy::GaussianRbfPolicy;
use safe_pg::rng::{streams, RandomSource};
use safe_pg::trainers::{train, DualRollout, Method, TrainerConfig};

fn main() -> anyhow::Result<()> {
    let mut args = std::env::args().skip(1);
    let episodes: u64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(2_000);
    let rollouts: u64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(5);
    let starts = NavEnvSpec::reference_starts();
    let env = NavEnvSpec { start: StartDistribution::Fixed { points: starts.clone() }, ..NavEnvSpec::five_obstacles() };
    let config = TrainerConfig {
        method: Method::ProbSpgReinforce,
        eta_theta: 0.02,
        eta_lambda: 0.002,
        penalty: 0.0,
        delta: 0.05,
        episodes,
        seed: 0,
        clip_norm: Some(1e3),
        dual_rollout: DualRollout::Reuse,
    };
    let policy = train(&config, &env, GaussianRbfPolicy::paper_default(), &mut SafetyCritic::default())?.policy;

    let stdout = std::io::stdout();
    let mut out = std::io::BufWriter::new(stdout.lock());
    writeln!(out, "start,rollout,t,x,y,safe")?;
    for (k, &start) in starts.iter().enumerate() {
        let probe = NavEnvSpec { start: StartDistribution::Fixed { points: vec![start] }, ..env.clone() };
        for r in 0..rollouts {
            let traj = rollout(&probe, &policy, &mut RandomSource::new(k as u64, streams::AUX + r))?;
            for (t, (s, safe)) in traj.states.iter().zip(&traj.safe_flags).enumerate() {
                writeln!(out, "{k},{r},{t},{},{},{}", s[0], s[1], *safe as u8)?;
            }
        }
    }
    Ok(())
}
