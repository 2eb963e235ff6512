//! Safe Primal-Dual on the five-obstacle navigation task with the RBF policy.
//!
//! ```text
//! cargo run --release --example nav_primal_dual -- [episodes] [reinforce|actor-critic] [seed]
//! ```

use safe_pg::env::{NavEnvSpec, StartDistribution};
use safe_pg::estimators::SafetyCritic;
use safe_pg::policy::GaussianRbfPolicy;
use safe_pg::trainers::{evaluate, train_with, DualRollout, Method, TrainerConfig};

fn main() -> anyhow::Result<()> {
    let mut args = std::env::args().skip(1);
    let episodes: u64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(5_000);
    let method = match args.next().as_deref() {
        None | Some("reinforce") => Method::ProbSpgReinforce,
        Some("actor-critic") => Method::ProbSpgActorCritic,
        Some(other) => anyhow::bail!("unknown estimator `{other}`"),
    };
    let seed: u64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(0);

    let train_env = NavEnvSpec { start: StartDistribution::Fixed { points: NavEnvSpec::reference_starts() }, ..NavEnvSpec::five_obstacles() };
    let config = TrainerConfig {
        method,
        eta_theta: 0.02,
        eta_lambda: 0.002,
        penalty: 0.0,
        delta: 0.05,
        episodes,
        seed,
        clip_norm: Some(1e3),
        dual_rollout: DualRollout::Reuse,
    };
    let steps = (train_env.horizon + 1) as f64;
    let report_every = (episodes / 10).max(1);
    let mut critic = SafetyCritic::default();
    let (policy, dual) = train_with(&config, &train_env, GaussianRbfPolicy::paper_default(), &mut critic, |m, _| {
        if (m.episode + 1) % report_every == 0 {
            println!(
                "episode {:>7}  avg return/step {:>9.3}  avg safety {:.4}  lambda {:.4}",
                m.episode + 1,
                m.avg_return / steps,
                m.avg_safety,
                m.lambda
            );
        }
        Ok(())
    })?;
    if method == Method::ProbSpgActorCritic {
        println!("critic H1 {:.4} H2 {:.4}", critic.h1, critic.h2);
    }

    let eval = evaluate(&policy, &NavEnvSpec::five_obstacles(), 500, seed)?;
    println!(
        "evaluation from uniform safe starts: return/step {:.3}, safety {:.3}, final lambda {:.4}",
        eval.mean_return / steps,
        eval.safety,
        dual.lambda
    );
    Ok(())
}
