//! Weighted sums over every trajectory of a finite MDP.

use super::dp::{backward_safety, evaluate_with_grad, Quantity};
use crate::env::{for_each_trajectory, Environment, FiniteMdp, DEFAULT_ENUMERATION_CAP};
use crate::estimators::{classic_pg, indicator_products, spg_actor_critic, spg_reinforce};
use crate::episode::Trajectory;
use crate::policy::{Policy, TabularSoftmaxPolicy};
use crate::Result;

/// Exact value, safety probability and cumulative safety, with gradients in the softmax logits.
#[derive(Clone, Debug, PartialEq)]
pub struct EnumerationResult {
    pub value: f64,
    pub p_safe: f64,
    pub v_c: f64,
    /// Score-function identity applied trajectory-wise.
    pub grad_value: Vec<f64>,
    pub grad_p_safe: Vec<f64>,
    pub grad_v_c: Vec<f64>,
    pub trajectories: usize,
}

fn cumulative_fraction(traj: &Trajectory<usize, usize>) -> f64 {
    traj.safe_flags.iter().filter(|&&f| f).count() as f64 / traj.safe_flags.len() as f64
}

fn add_scaled(acc: &mut [f64], v: &[f64], w: f64) {
    for (a, x) in acc.iter_mut().zip(v) {
        *a += w * x;
    }
}

/// `Σ_t ∇log π(A_t|S_t)` over the first `T` steps.
fn total_score(traj: &Trajectory<usize, usize>, policy: &TabularSoftmaxPolicy, out: &mut [f64]) {
    let mut score = vec![0.0; out.len()];
    out.iter_mut().for_each(|v| *v = 0.0);
    for t in 0..traj.horizon() {
        policy.log_prob_grad_into(&traj.states[t], &traj.actions[t], &mut score);
        add_scaled(out, &score, 1.0);
    }
}

pub fn exact_eval(mdp: &FiniteMdp, policy: &TabularSoftmaxPolicy) -> Result<EnumerationResult> {
    exact_eval_with_cap(mdp, policy, DEFAULT_ENUMERATION_CAP)
}

pub fn exact_eval_with_cap(mdp: &FiniteMdp, policy: &TabularSoftmaxPolicy, cap: u128) -> Result<EnumerationResult> {
    let d = policy.num_params();
    let mut out = EnumerationResult {
        value: 0.0,
        p_safe: 0.0,
        v_c: 0.0,
        grad_value: vec![0.0; d],
        grad_p_safe: vec![0.0; d],
        grad_v_c: vec![0.0; d],
        trajectories: 0,
    };
    let mut score = vec![0.0; d];
    for_each_trajectory(mdp, &policy.table(), cap, |traj, p| {
        let ret = traj.episode_return();
        let safe = if traj.is_safe() { 1.0 } else { 0.0 };
        let frac = cumulative_fraction(traj);
        out.value += p * ret;
        out.p_safe += p * safe;
        out.v_c += p * frac;
        total_score(traj, policy, &mut score);
        add_scaled(&mut out.grad_value, &score, p * ret);
        add_scaled(&mut out.grad_p_safe, &score, p * safe);
        add_scaled(&mut out.grad_v_c, &score, p * frac);
        out.trajectories += 1;
    })?;
    Ok(out)
}

/// The same three gradients through differentiation of the backward recursion.
pub fn recursion_gradients(mdp: &FiniteMdp, policy: &TabularSoftmaxPolicy) -> [(f64, Vec<f64>); 3] {
    [
        evaluate_with_grad(mdp, policy, Quantity::Value),
        evaluate_with_grad(mdp, policy, Quantity::SafeProbability),
        evaluate_with_grad(mdp, policy, Quantity::CumulativeSafety),
    ]
}

/// Central finite differences of `f` in every logit.
pub fn finite_difference<F>(policy: &TabularSoftmaxPolicy, h: f64, f: F) -> Vec<f64>
where
    F: Fn(&TabularSoftmaxPolicy) -> f64,
{
    let mut probe = policy.clone();
    (0..policy.num_params())
        .map(|i| {
            let base = probe.params()[i];
            probe.params_mut()[i] = base + h;
            let up = f(&probe);
            probe.params_mut()[i] = base - h;
            let down = f(&probe);
            probe.params_mut()[i] = base;
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Exact moments of the scalar coefficients `X = T·G_1` and
/// `Y = Σ_t G_t^c q[t][S_t][A_t]`, and the expectations of the gradient estimators.
#[derive(Clone, Debug, PartialEq)]
pub struct EstimatorMoments {
    pub mean_x: f64,
    pub var_x: f64,
    pub mean_y: f64,
    pub var_y: f64,
    pub mean_reinforce: Vec<f64>,
    pub mean_actor_critic: Vec<f64>,
    pub mean_classic: Vec<f64>,
}

pub fn estimator_moments(mdp: &FiniteMdp, policy: &TabularSoftmaxPolicy) -> Result<EstimatorMoments> {
    let table = policy.table();
    let q = backward_safety(mdp, &table);
    let na = mdp.n_actions();
    let horizon = mdp.horizon();
    let d = policy.num_params();

    let (mut ex, mut ex2, mut ey, mut ey2) = (0.0, 0.0, 0.0, 0.0);
    let mut mean_reinforce = vec![0.0; d];
    let mut mean_actor_critic = vec![0.0; d];
    let mut mean_classic = vec![0.0; d];
    for_each_trajectory(mdp, &table, DEFAULT_ENUMERATION_CAP, |traj, p| {
        let products = indicator_products(&traj.safe_flags);
        let x = if products.future_safe(1) { horizon as f64 } else { 0.0 };
        let y: f64 = (0..horizon)
            .filter(|&t| products.g_backward[t])
            .map(|t| q[t][traj.states[t] * na + traj.actions[t]])
            .sum();
        ex += p * x;
        ex2 += p * x * x;
        ey += p * y;
        ey2 += p * y * y;
        add_scaled(&mut mean_reinforce, &spg_reinforce(traj, policy), p);
        add_scaled(&mut mean_actor_critic, &spg_actor_critic(traj, policy, |t, s, a| q[t][s * na + a]), p);
        add_scaled(&mut mean_classic, &classic_pg(traj, policy), p);
    })?;
    Ok(EstimatorMoments {
        mean_x: ex,
        var_x: ex2 - ex * ex,
        mean_y: ey,
        var_y: ey2 - ey * ey,
        mean_reinforce,
        mean_actor_critic,
        mean_classic,
    })
}

/// `P(S_{t+1..=T} safe | S_t = s, A_t = a)` read off the enumeration as a conditional
/// frequency; `None` where `(t, s, a)` has probability zero.
pub fn conditional_future_safety(mdp: &FiniteMdp, policy: &TabularSoftmaxPolicy) -> Result<Vec<Vec<Option<f64>>>> {
    let na = mdp.n_actions();
    let cells = mdp.n_states() * na;
    let horizon = mdp.horizon();
    let mut joint = vec![vec![0.0; cells]; horizon];
    let mut marginal = vec![vec![0.0; cells]; horizon];
    for_each_trajectory(mdp, &policy.table(), DEFAULT_ENUMERATION_CAP, |traj, p| {
        let products = indicator_products(&traj.safe_flags);
        for t in 0..horizon {
            let k = traj.states[t] * na + traj.actions[t];
            marginal[t][k] += p;
            if products.future_safe(t + 1) {
                joint[t][k] += p;
            }
        }
    })?;
    Ok(joint
        .into_iter()
        .zip(marginal)
        .map(|(j, m)| j.into_iter().zip(m).map(|(j, m)| (m > 0.0).then(|| j / m)).collect())
        .collect())
}
