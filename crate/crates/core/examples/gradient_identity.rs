//! Exact check of the safety-gradient identity on the builtin finite MDPs:
//! the enumerated mean of SPG-REINFORCE and of SPG-Actor-Critic (with the
//! exact critic) against the gradient of `P(all safe)` from the DP recursion.
//!
//! ```text
//! cargo run --example gradient_identity
//! ```

use safe_pg::oracle::{builtin_instances, estimator_moments, evaluate_with_grad, max_abs_error, Quantity};
use safe_pg::policy::TabularSoftmaxPolicy;
use safe_pg::rng::RandomSource;

fn main() -> anyhow::Result<()> {
    let mut rng = RandomSource::new(7, 0);
    for (name, mdp) in builtin_instances() {
        for trial in 0..3 {
            let d = mdp.n_states() * mdp.n_actions();
            let logits = (0..d).map(|_| if trial == 0 { 0.0 } else { 1.5 * rng.standard_normal() }).collect();
            let policy = TabularSoftmaxPolicy::from_logits(mdp.n_states(), mdp.n_actions(), logits);
            let (p_safe, grad) = evaluate_with_grad(&mdp, &policy, Quantity::SafeProbability);
            let m = estimator_moments(&mdp, &policy)?;
            println!(
                "{name:<16} policy {trial}: P_safe {p_safe:.6}  |E[spg-reinforce] - grad| {:.1e}  |E[spg-ac] - E[spg-reinforce]| {:.1e}",
                max_abs_error(&m.mean_reinforce, &grad),
                max_abs_error(&m.mean_actor_critic, &m.mean_reinforce),
            );
        }
    }
    Ok(())
}
