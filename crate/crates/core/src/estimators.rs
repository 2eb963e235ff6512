//! Single-trajectory gradient estimators.
//!
//! * classic REINFORCE for the value, `Σ_t R_t ∇log π(A_t|S_t)`;
//! * SPG-REINFORCE for the probability of staying safe, `G_1 Σ_t ∇log π(A_t|S_t)`;
//! * SPG-Actor-Critic, `Σ_t G_t^c · P̂(S_t, A_t) · ∇log π(A_t|S_t)`,
//!
//! where `G_t` is the product of safety indicators over `t..=T` and `G_t^c`
//! the product over `0..=t`. Only the first `T` steps carry a score term.

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::env::{NavEnvSpec, MAP_MAX, MAP_MIN};
use crate::episode::{Trajectory, Vec2};
use crate::policy::{sigmoid, Policy};
use crate::{Error, Result};

/// `g_forward[t] = G_t` and `g_backward[t] = G_t^c`, both of length `T + 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct IndicatorProducts {
    pub g_forward: Vec<bool>,
    pub g_backward: Vec<bool>,
}

impl IndicatorProducts {
    /// `G_t` with the empty-product convention `G_{T+1} = 1`.
    pub fn future_safe(&self, t: usize) -> bool {
        self.g_forward.get(t).copied().unwrap_or(true)
    }
}

pub fn indicator_products(safe_flags: &[bool]) -> IndicatorProducts {
    let n = safe_flags.len();
    let mut g_forward = vec![false; n];
    let mut acc = true;
    for t in (0..n).rev() {
        acc &= safe_flags[t];
        g_forward[t] = acc;
    }
    let mut g_backward = vec![false; n];
    let mut acc = true;
    for t in 0..n {
        acc &= safe_flags[t];
        g_backward[t] = acc;
    }
    IndicatorProducts { g_forward, g_backward }
}

/// `Σ_t w_k[t] ∇log π(A_t|S_t)` for several weight sequences in one pass over the scores.
pub fn weighted_score_sums<P>(traj: &Trajectory<P::State, P::Action>, policy: &P, weights: &[&[f64]]) -> Vec<Vec<f64>>
where
    P: Policy,
{
    let n = policy.num_params();
    let mut sums = vec![vec![0.0; n]; weights.len()];
    let mut score = vec![0.0; n];
    for t in 0..traj.horizon() {
        if weights.iter().all(|w| w[t] == 0.0) {
            continue;
        }
        policy.log_prob_grad_into(&traj.states[t], &traj.actions[t], &mut score);
        for (sum, w) in sums.iter_mut().zip(weights) {
            let wt = w[t];
            if wt != 0.0 {
                for (acc, g) in sum.iter_mut().zip(&score) {
                    *acc += wt * g;
                }
            }
        }
    }
    sums
}

/// Reward-to-go `R_t = Σ_{u=t}^{T} r_u` for `t = 0..T`.
pub fn rewards_to_go(rewards: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; rewards.len()];
    let mut acc = 0.0;
    for t in (0..rewards.len()).rev() {
        acc += rewards[t];
        out[t] = acc;
    }
    out
}

fn classic_weights(rewards: &[f64]) -> Vec<f64> {
    let mut w = rewards_to_go(rewards);
    w.pop();
    w
}

fn reinforce_weights<S, A>(traj: &Trajectory<S, A>) -> Vec<f64> {
    let products = indicator_products(&traj.safe_flags);
    let g1 = if products.future_safe(1) { 1.0 } else { 0.0 };
    vec![g1; traj.horizon()]
}

fn actor_critic_weights<S, A, C>(traj: &Trajectory<S, A>, critic: C) -> Vec<f64>
where
    C: Fn(usize, &S, &A) -> f64,
{
    let products = indicator_products(&traj.safe_flags);
    (0..traj.horizon())
        .map(|t| if products.g_backward[t] { critic(t, &traj.states[t], &traj.actions[t]) } else { 0.0 })
        .collect()
}

pub fn classic_pg<P: Policy>(traj: &Trajectory<P::State, P::Action>, policy: &P) -> Vec<f64> {
    classic_pg_with_rewards(traj, policy, &traj.rewards)
}

/// Classic REINFORCE on an alternative reward sequence (e.g. shaped rewards).
pub fn classic_pg_with_rewards<P: Policy>(traj: &Trajectory<P::State, P::Action>, policy: &P, rewards: &[f64]) -> Vec<f64> {
    let w = classic_weights(rewards);
    weighted_score_sums(traj, policy, &[&w]).pop().expect("one weight sequence")
}

pub fn spg_reinforce<P: Policy>(traj: &Trajectory<P::State, P::Action>, policy: &P) -> Vec<f64> {
    let w = reinforce_weights(traj);
    weighted_score_sums(traj, policy, &[&w]).pop().expect("one weight sequence")
}

/// `critic(t, s, a)` estimates `P(S_{t+1..=T} safe | S_t = s, A_t = a)` and must lie in `[0, 1]`.
pub fn spg_actor_critic<P, C>(traj: &Trajectory<P::State, P::Action>, policy: &P, critic: C) -> Vec<f64>
where
    P: Policy,
    C: Fn(usize, &P::State, &P::Action) -> f64,
{
    let w = actor_critic_weights(traj, critic);
    weighted_score_sums(traj, policy, &[&w]).pop().expect("one weight sequence")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SafetyEstimator {
    SpgReinforce,
    SpgActorCritic,
}

impl FromStr for SafetyEstimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "spg-reinforce" => Ok(Self::SpgReinforce),
            "spg-actor-critic" => Ok(Self::SpgActorCritic),
            other => Err(Error::InvalidInput(format!("unknown safety estimator `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradientEstimate {
    pub reward_grad: Vec<f64>,
    pub safety_grad: Vec<f64>,
    pub combined: Vec<f64>,
    pub lambda: f64,
}

/// `classic_pg + λ · (selected safety estimator)`, all from a single pass over the scores.
pub fn combined_gradient<P, C>(
    traj: &Trajectory<P::State, P::Action>,
    policy: &P,
    lambda: f64,
    method: SafetyEstimator,
    critic: C,
) -> Result<GradientEstimate>
where
    P: Policy,
    C: Fn(usize, &P::State, &P::Action) -> f64,
{
    if !(lambda >= 0.0) {
        return Err(Error::InvalidInput(format!("λ must be nonnegative, got {lambda}")));
    }
    let reward_w = classic_weights(&traj.rewards);
    let safety_w = match method {
        SafetyEstimator::SpgReinforce => reinforce_weights(traj),
        SafetyEstimator::SpgActorCritic => actor_critic_weights(traj, critic),
    };
    let mut sums = weighted_score_sums(traj, policy, &[&reward_w, &safety_w]);
    let safety_grad = sums.pop().expect("two sums");
    let reward_grad = sums.pop().expect("two sums");
    let combined = reward_grad.iter().zip(&safety_grad).map(|(r, s)| r + lambda * s).collect();
    Ok(GradientEstimate { reward_grad, safety_grad, combined, lambda })
}

/// Where the sigmoid critic measures obstacle distance.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CriticInput {
    /// The deterministic successor `clamp(s + a·T_s)`.
    NextState,
    /// The current state, ignoring the action.
    CurrentState,
}

/// `P̂(s, a) = sigmoid(H1 · (min_i d_i − H2))`, fitted by gradient descent on
/// the squared error against realised future-safety indicators.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SafetyCritic {
    pub h1: f64,
    pub h2: f64,
    pub step_size: f64,
    pub input: CriticInput,
}

impl Default for SafetyCritic {
    fn default() -> Self {
        Self { h1: 2.0, h2: 0.0, step_size: 1e-3, input: CriticInput::NextState }
    }
}

impl SafetyCritic {
    fn probe_point(&self, spec: &NavEnvSpec, s: Vec2, a: Option<Vec2>) -> Vec2 {
        match (self.input, a) {
            (CriticInput::NextState, Some(a)) => [
                (s[0] + a[0] * spec.step_size).clamp(MAP_MIN, MAP_MAX),
                (s[1] + a[1] * spec.step_size).clamp(MAP_MIN, MAP_MAX),
            ],
            _ => s,
        }
    }

    fn distance(&self, spec: &NavEnvSpec, s: Vec2, a: Option<Vec2>) -> f64 {
        spec.min_obstacle_distance(self.probe_point(spec, s, a))
    }

    pub fn estimate(&self, spec: &NavEnvSpec, s: Vec2, a: Vec2) -> f64 {
        sigmoid(self.h1 * (self.distance(spec, s, Some(a)) - self.h2))
    }

    /// Per-step `(distance, target)` pairs for `t = 0..=T`; the terminal step has no action.
    fn regression_terms(&self, traj: &Trajectory<Vec2, Vec2>, spec: &NavEnvSpec) -> Vec<(f64, f64)> {
        let products = indicator_products(&traj.safe_flags);
        (0..traj.states.len())
            .map(|t| {
                let a = traj.actions.get(t).copied();
                let target = if products.future_safe(t + 1) { 1.0 } else { 0.0 };
                (self.distance(spec, traj.states[t], a), target)
            })
            .collect()
    }

    /// `Σ_{t=0}^{T} (P̂(S_t, A_t) − Π_{u=t+1}^{T} 1(S_u safe))²`.
    pub fn loss(&self, traj: &Trajectory<Vec2, Vec2>, spec: &NavEnvSpec) -> f64 {
        self.regression_terms(traj, spec)
            .into_iter()
            .map(|(d, y)| {
                let p = sigmoid(self.h1 * (d - self.h2));
                (p - y) * (p - y)
            })
            .sum()
    }

    /// `(∂loss/∂H1, ∂loss/∂H2)`.
    pub fn loss_grad(&self, traj: &Trajectory<Vec2, Vec2>, spec: &NavEnvSpec) -> (f64, f64) {
        let mut g1 = 0.0;
        let mut g2 = 0.0;
        for (d, y) in self.regression_terms(traj, spec) {
            let z = self.h1 * (d - self.h2);
            let p = sigmoid(z);
            let common = 2.0 * (p - y) * p * (1.0 - p);
            // Obstacle-free layouts put d at +∞; the sigmoid is flat there.
            if common == 0.0 {
                continue;
            }
            g1 += common * (d - self.h2);
            g2 -= common * self.h1;
        }
        (g1, g2)
    }

    /// One gradient-descent step on [`SafetyCritic::loss`].
    pub fn update(&self, traj: &Trajectory<Vec2, Vec2>, spec: &NavEnvSpec) -> SafetyCritic {
        let (g1, g2) = self.loss_grad(traj, spec);
        SafetyCritic { h1: self.h1 - self.step_size * g1, h2: self.h2 - self.step_size * g2, ..*self }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::Obstacle;
    use crate::policy::TabularSoftmaxPolicy;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn finite_traj(states: Vec<usize>, actions: Vec<usize>, rewards: Vec<f64>, safe: Vec<bool>) -> Trajectory<usize, usize> {
        Trajectory { states, actions, rewards, safe_flags: safe }
    }

    #[test]
    fn indicator_examples() {
        let p = indicator_products(&[true, true, true, true]);
        assert!(p.g_forward.iter().all(|&g| g) && p.g_backward.iter().all(|&g| g));

        let p = indicator_products(&[false, true, true, true]);
        assert!(p.g_backward.iter().all(|&g| !g));
        assert!(!p.g_forward[0] && p.g_forward[1..].iter().all(|&g| g));

        let p = indicator_products(&[true, true, true, false]);
        assert!(p.g_forward.iter().all(|&g| !g));
        assert!(p.g_backward[..3].iter().all(|&g| g) && !p.g_backward[3]);
    }

    proptest! {
        #[test]
        fn indicator_recursions(flags in proptest::collection::vec(any::<bool>(), 1..25)) {
            let p = indicator_products(&flags);
            let n = flags.len();
            let g0 = flags.iter().all(|&f| f);
            for t in 0..n {
                let next = p.future_safe(t + 1);
                prop_assert_eq!(p.g_forward[t], flags[t] && next);
                let prev = if t == 0 { true } else { p.g_backward[t - 1] };
                prop_assert_eq!(p.g_backward[t], flags[t] && prev);
                prop_assert_eq!(p.g_backward[t] && next, g0);
            }
        }
    }

    #[test]
    fn zero_rewards_give_zero_classic_gradient() {
        let policy = TabularSoftmaxPolicy::from_logits(2, 2, vec![0.3, -0.2, 1.0, 0.0]);
        let traj = finite_traj(vec![0, 1, 0], vec![1, 0], vec![0.0; 3], vec![true; 3]);
        assert!(classic_pg(&traj, &policy).iter().all(|&g| g == 0.0));
    }

    #[test]
    fn one_step_classic_gradient() {
        let policy = TabularSoftmaxPolicy::from_logits(2, 2, vec![0.3, -0.2, 1.0, 0.0]);
        let traj = finite_traj(vec![0, 1], vec![1], vec![0.25, 2.0], vec![true; 2]);
        let score = policy.log_prob_grad(&0, &1);
        let g = classic_pg(&traj, &policy);
        for (x, s) in g.iter().zip(score) {
            assert_relative_eq!(*x, 2.25 * s, epsilon = 1e-15);
        }
    }

    #[test]
    fn reinforce_vanishes_after_violation() {
        let policy = TabularSoftmaxPolicy::from_logits(2, 2, vec![0.3, -0.2, 1.0, 0.0]);
        let traj = finite_traj(vec![0, 0, 1], vec![1, 0], vec![0.0; 3], vec![true, true, false]);
        assert!(spg_reinforce(&traj, &policy).iter().all(|&g| g == 0.0));
        let safe = finite_traj(vec![0, 0, 0], vec![1, 0], vec![0.0; 3], vec![true; 3]);
        let expected: Vec<f64> = policy.log_prob_grad(&0, &1).iter().zip(policy.log_prob_grad(&0, &0)).map(|(a, b)| a + b).collect();
        assert_eq!(spg_reinforce(&safe, &policy), expected);
        assert!(expected.iter().any(|&g| g != 0.0));
    }

    #[test]
    fn actor_critic_examples() {
        let policy = TabularSoftmaxPolicy::from_logits(2, 2, vec![0.3, -0.2, 1.0, 0.0]);
        let unsafe_start = finite_traj(vec![1, 0, 0], vec![1, 0], vec![0.0; 3], vec![false, true, true]);
        assert!(spg_actor_critic(&unsafe_start, &policy, |_, _, _| 0.7).iter().all(|&g| g == 0.0));

        let safe = finite_traj(vec![0, 1, 0], vec![1, 0], vec![0.0; 3], vec![true; 3]);
        let expected: Vec<f64> = policy.log_prob_grad(&0, &1).iter().zip(policy.log_prob_grad(&1, &0)).map(|(a, b)| a + b).collect();
        assert_eq!(spg_actor_critic(&safe, &policy, |_, _, _| 1.0), expected);

        // Violation at the end: REINFORCE is silent, the critic-weighted estimate is not.
        let late = finite_traj(vec![0, 0, 1], vec![1, 1], vec![0.0; 3], vec![true, true, false]);
        let g = spg_actor_critic(&late, &policy, |_, _, _| 0.5);
        assert!(g.iter().any(|&v| v != 0.0));
    }

    #[test]
    fn combined_gradient_identities() {
        let policy = TabularSoftmaxPolicy::from_logits(2, 2, vec![0.3, -0.2, 1.0, 0.0]);
        let traj = finite_traj(vec![0, 0, 1], vec![1, 0], vec![0.5, -1.0, 2.0], vec![true, true, false]);
        let crit = |_: usize, _: &usize, _: &usize| 0.4;

        let g = combined_gradient(&traj, &policy, 0.0, SafetyEstimator::SpgActorCritic, crit).unwrap();
        assert_eq!(g.combined, classic_pg(&traj, &policy));

        let g = combined_gradient(&traj, &policy, 1.0, SafetyEstimator::SpgReinforce, crit).unwrap();
        assert!(g.safety_grad.iter().all(|&v| v == 0.0));
        assert_eq!(g.combined, classic_pg(&traj, &policy));

        for lambda in [0.3, 2.5, 17.0] {
            let g = combined_gradient(&traj, &policy, lambda, SafetyEstimator::SpgActorCritic, crit).unwrap();
            for i in 0..g.combined.len() {
                assert_eq!(g.combined[i], g.reward_grad[i] + lambda * g.safety_grad[i]);
            }
            assert_eq!(g.safety_grad, spg_actor_critic(&traj, &policy, crit));
        }
        assert!(combined_gradient(&traj, &policy, -1.0, SafetyEstimator::SpgReinforce, crit).is_err());
        assert!("spg-magic".parse::<SafetyEstimator>().is_err());
        assert_eq!("spg-actor-critic".parse::<SafetyEstimator>().unwrap(), SafetyEstimator::SpgActorCritic);
    }

    fn circle_env() -> NavEnvSpec {
        NavEnvSpec { obstacles: vec![Obstacle::Circle { center: [5.0, 5.0], radius: 2.0 }], ..NavEnvSpec::five_obstacles() }
    }

    #[test]
    fn critic_values() {
        let env = circle_env();
        let zero = [0.0, 0.0];
        let c = SafetyCritic { h1: 1e4, h2: 0.5, ..SafetyCritic::default() };
        assert_eq!(c.estimate(&env, [9.5, 9.5], zero), 1.0);
        let c = SafetyCritic { h1: 3.0, h2: 1.0, ..SafetyCritic::default() };
        assert_eq!(c.estimate(&env, [5.0, 8.0], zero), 0.5);
        let c = SafetyCritic { h1: 1.0, h2: 0.0, ..SafetyCritic::default() };
        let s = [5.0, 7.0 + 3.0f64.ln()];
        assert_relative_eq!(c.estimate(&env, s, zero), 0.75, epsilon = 1e-12);
        // The next-state probe moves with the action.
        let c = SafetyCritic { h1: 1.0, h2: 0.0, ..SafetyCritic::default() };
        assert_relative_eq!(c.estimate(&env, [5.0, 7.0], [0.0, 3.0f64.ln() / 0.05]), 0.75, epsilon = 1e-12);
        let c = SafetyCritic { input: CriticInput::CurrentState, ..c };
        assert_eq!(c.estimate(&env, [5.0, 7.0], [0.0, 20.0]), 0.5);
    }

    fn hand_traj() -> Trajectory<Vec2, Vec2> {
        // Three states, the last inside the obstacle.
        Trajectory {
            states: vec![[5.0, 9.0], [5.0, 8.0], [5.0, 6.5]],
            actions: vec![[0.0, -20.0], [0.0, -30.0]],
            rewards: vec![0.0; 3],
            safe_flags: vec![true, true, false],
        }
    }

    #[test]
    fn critic_loss_by_hand() {
        let env = circle_env();
        let c = SafetyCritic { h1: 1.5, h2: 0.25, ..SafetyCritic::default() };
        let traj = hand_traj();
        // Next-state distances: (5,8) → 1, (5,6.5) → -0.5, terminal (5,6.5) → -0.5.
        // Targets: G_1 = 0, G_2 = 0, empty product = 1.
        let sig = |d: f64| 1.0 / (1.0 + (-1.5 * (d - 0.25)).exp());
        let expected = sig(1.0).powi(2) + sig(-0.5).powi(2) + (sig(-0.5) - 1.0).powi(2);
        assert_relative_eq!(c.loss(&traj, &env), expected, epsilon = 1e-14);
    }

    #[test]
    fn critic_gradient_matches_finite_differences() {
        let env = circle_env();
        let traj = hand_traj();
        let h = 1e-6;
        for (h1, h2) in [(1.5, 0.25), (0.3, -1.0), (4.0, 0.8)] {
            let c = SafetyCritic { h1, h2, ..SafetyCritic::default() };
            let (g1, g2) = c.loss_grad(&traj, &env);
            let d1 = (SafetyCritic { h1: h1 + h, ..c }.loss(&traj, &env) - SafetyCritic { h1: h1 - h, ..c }.loss(&traj, &env)) / (2.0 * h);
            let d2 = (SafetyCritic { h2: h2 + h, ..c }.loss(&traj, &env) - SafetyCritic { h2: h2 - h, ..c }.loss(&traj, &env)) / (2.0 * h);
            assert!((g1 - d1).abs() <= 1e-5 * (1.0 + d1.abs()));
            assert!((g2 - d2).abs() <= 1e-5 * (1.0 + d2.abs()));
        }
    }

    #[test]
    fn perfect_critic_is_a_fixed_point() {
        let env = circle_env();
        let traj = Trajectory {
            states: vec![[9.0, 9.0], [9.5, 9.5], [9.8, 9.8]],
            actions: vec![[10.0, 10.0], [6.0, 6.0]],
            rewards: vec![0.0; 3],
            safe_flags: vec![true; 3],
        };
        let c = SafetyCritic { h1: 1e3, h2: 0.1, ..SafetyCritic::default() };
        assert_eq!(c.loss(&traj, &env), 0.0);
        assert_eq!(c.update(&traj, &env), c);
    }

    proptest! {
        #[test]
        fn critic_output_is_a_probability(h1 in 0.01f64..20.0, h2 in -3.0f64..3.0, x in 0.0f64..10.0, y in 0.0f64..10.0) {
            let c = SafetyCritic { h1, h2, ..SafetyCritic::default() };
            let p = c.estimate(&NavEnvSpec::five_obstacles(), [x, y], [0.0, 0.0]);
            prop_assert!(p > 0.0 && p <= 1.0);
        }
    }
}
