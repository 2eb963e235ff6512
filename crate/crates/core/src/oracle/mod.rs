//! Exact computations on enumerable finite MDPs.
//!
//! Two independent routes to every gradient are provided: the score-function
//! identity summed over all trajectories ([`exact_eval`]) and forward-mode
//! differentiation of the backward recursion ([`recursion_gradients`]).

mod dp;
mod enumeration;
mod grid;

pub use dp::{backward_safety, evaluate, evaluate_with_grad, policy_stats, PolicyStats, Quantity};
pub use enumeration::{
    conditional_future_safety, estimator_moments, exact_eval, exact_eval_with_cap, finite_difference, recursion_gradients,
    EnumerationResult, EstimatorMoments,
};
pub use grid::{
    certify_bounds, certify_bounds_with, constrained_max, default_lambda_grid, dual_grid, dual_grid_from_stats,
    feasibility_inclusions, feasibility_inclusions_from_stats, grid_stats, lambda_grid, refine_dual, BoundCertificate,
    CertifyOptions, DualGridResult, InclusionReport, PolicyGrid, Problem, FEASIBILITY_TOL, MAX_LAMBDA_REFINEMENTS,
};

use crate::env::FiniteMdp;

/// The builtin enumerable instances, by name.
pub fn builtin_instances() -> Vec<(&'static str, FiniteMdp)> {
    vec![
        ("always-safe", FiniteMdp::always_safe()),
        ("risky-two-state", FiniteMdp::risky_two_state()),
        ("risky-goal", FiniteMdp::risky_goal()),
        ("random-3x2", FiniteMdp::random_instance(7)),
    ]
}

pub fn builtin_instance(name: &str) -> Option<FiniteMdp> {
    builtin_instances().into_iter().find(|(n, _)| *n == name).map(|(_, m)| m)
}

/// Largest componentwise `|a − b| / max(1, |b|)`.
pub fn max_rel_error(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs() / y.abs().max(1.0)).fold(0.0, f64::max)
}

pub fn max_abs_error(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
