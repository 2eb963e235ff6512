//! Exact variances of the scalar coefficients multiplying the score in
//! SPG-REINFORCE (`X`) and SPG-Actor-Critic with the exact critic (`Y`).
//!
//! ```text
//! cargo run --example variance_ordering
//! ```

use safe_pg::oracle::{builtin_instances, estimator_moments};
use safe_pg::policy::TabularSoftmaxPolicy;

fn main() -> anyhow::Result<()> {
    println!("{:<16} {:>6} {:>10} {:>10} {:>10} {:>10}", "instance", "tilt", "E[X]", "Var X", "E[Y]", "Var Y");
    for (name, mdp) in builtin_instances() {
        let (ns, na) = (mdp.n_states(), mdp.n_actions());
        for tilt in [-2.0, 0.0, 2.0] {
            // Logit `tilt` on action 0 in every state.
            let logits = (0..ns * na).map(|i| if i % na == 0 { tilt } else { 0.0 }).collect();
            let m = estimator_moments(&mdp, &TabularSoftmaxPolicy::from_logits(ns, na, logits))?;
            println!("{name:<16} {tilt:>6.1} {:>10.5} {:>10.5} {:>10.5} {:>10.5}", m.mean_x, m.var_x, m.mean_y, m.var_y);
        }
    }
    Ok(())
}
