//! Gated-linear policy around one circular obstacle (T = 100). After training,
//! prints the gate value and the closest approach to the obstacle along the
//! mean trajectory from a few starts.
//!
//! ```text
//! cargo run --release --example single_obstacle_gated -- [episodes]
//! ```

use safe_pg::env::{rollout, NavEnvSpec, StartDistribution};
use safe_pg::estimators::SafetyCritic;
use safe_pg::policy::{GateMode, GatedLinearPolicy, GaussianNoise, DEFAULT_GATE};
use safe_pg::rng::RandomSource;
use safe_pg::trainers::{evaluate, train, DualRollout, Method, TrainerConfig};

fn main() -> anyhow::Result<()> {
    let episodes: u64 = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(3_000);
    let env = NavEnvSpec::single_obstacle();
    let gate = GateMode::Frozen { h1: DEFAULT_GATE.0, h2: DEFAULT_GATE.1 };
    let policy = GatedLinearPolicy::for_env(&env, gate, GaussianNoise::new([0.5, 0.5]))?;
    let config = TrainerConfig {
        method: Method::ProbSpgReinforce,
        eta_theta: 0.002,
        eta_lambda: 0.002,
        penalty: 0.0,
        delta: 0.05,
        episodes,
        seed: 0,
        clip_norm: Some(1e3),
        dual_rollout: DualRollout::Reuse,
    };
    let out = train(&config, &env, policy, &mut SafetyCritic::default())?;
    let last = out.metrics.last().expect("episodes > 0");
    println!("trained {episodes} episodes: avg safety {:.3}, lambda {:.3}", last.avg_safety, out.dual.lambda);

    let mut mean_policy = out.policy.clone();
    mean_policy.set_deterministic(true);
    for start in [[1.0, 9.0], [2.0, 5.0], [5.0, 9.0], [8.0, 8.0]] {
        let probe = NavEnvSpec { start: StartDistribution::Fixed { points: vec![start] }, ..env.clone() };
        let traj = rollout(&probe, &mean_policy, &mut RandomSource::new(0, 0))?;
        let closest = traj.states.iter().map(|&s| env.min_obstacle_distance(s)).fold(f64::INFINITY, f64::min);
        let end = traj.states[traj.states.len() - 1];
        println!(
            "start ({:.1}, {:.1}): gate at start {:.3}, closest approach {closest:.3}, end ({:.2}, {:.2}), safe {}",
            start[0],
            start[1],
            mean_policy.gate(start),
            end[0],
            end[1],
            traj.is_safe()
        );
    }
    let eval = evaluate(&out.policy, &env, 300, 0)?;
    println!("evaluation: safety {:.3}, return {:.2}", eval.safety, eval.mean_return);
    Ok(())
}
