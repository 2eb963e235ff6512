//! Grid-search certificate for the optimality gap between the probabilistic
//! problem and its cumulative mirror.
//!
//! ```text
//! cargo run --release --example bound_certificate -- [instance] [delta]
//! ```

use safe_pg::oracle::{builtin_instance, certify_bounds};

fn main() -> anyhow::Result<()> {
    let mut args = std::env::args().skip(1);
    let name = args.next().unwrap_or_else(|| "risky-two-state".into());
    let delta: f64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(0.1);
    let mdp = builtin_instance(&name).ok_or_else(|| anyhow::anyhow!("unknown instance {name}"))?;

    let cert = certify_bounds(&mdp, delta)?;
    println!("{name}, delta = {delta}");
    println!("  P*      = {:.6}", cert.p_star);
    println!("  P^*     = {:.6}", cert.p_hat_star);
    println!("  lambda^ = {:.6}", cert.lambda_hat_star);
    println!("  D*      = {:.6}", cert.d_star);
    println!("  P^* + lambda^ delta T/(T+1) = {:.6}", cert.p_hat_star + cert.bound_gap);
    println!("  eps_grid = {:.2e}, mirror duality gap = {:.2e}", cert.eps_grid, cert.mirror_duality_gap);
    println!("  theorem-1 sandwich: {}, corollary-1 sandwich: {}", cert.sandwich_theorem1, cert.sandwich_corollary1);
    Ok(())
}
