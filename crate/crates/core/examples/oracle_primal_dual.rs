//! Safe Primal-Dual on an enumerable MDP, compared against the exact safety
//! probability of the iterates.
//!
//! ```text
//! cargo run --release --example oracle_primal_dual
//! ```

use safe_pg::env::FiniteMdp;
use safe_pg::oracle::{policy_stats, PolicyStats};
use safe_pg::policy::TabularSoftmaxPolicy;
use safe_pg::trainers::{train_with, DualRollout, ExactCritic, Method, TrainerConfig};

fn main() -> anyhow::Result<()> {
    let mdp = FiniteMdp::risky_two_state();
    for method in [Method::ProbSpgReinforce, Method::ProbSpgActorCritic] {
        for dual_rollout in [DualRollout::Reuse, DualRollout::Fresh] {
            let config = TrainerConfig {
                method,
                eta_theta: 0.05,
                eta_lambda: 0.005,
                penalty: 0.0,
                delta: 0.1,
                episodes: 50_000,
                seed: 1,
                clip_norm: None,
                dual_rollout,
            };
            let mut exact_avg = 0.0;
            let mut last = None;
            let mut count = 0.0;
            let (policy, dual) = train_with(&config, &mdp, TabularSoftmaxPolicy::zeros(2, 2), &mut ExactCritic::default(), |m, p| {
                let PolicyStats { p_safe, .. } = policy_stats(&mdp, &p.table());
                count += 1.0;
                exact_avg += (p_safe - exact_avg) / count;
                last = Some(*m);
                Ok(())
            })?;
            let m = last.expect("at least one episode");
            let fin = policy_stats(&mdp, &policy.table());
            println!(
                "{method:<22} {dual_rollout:?}: running safety {:.4}, exact average {:.4}, final P_safe {:.4}, value {:.4}, lambda {:.3}",
                m.avg_safety, exact_avg, fin.p_safe, fin.value, dual.lambda
            );
        }
    }
    Ok(())
}
