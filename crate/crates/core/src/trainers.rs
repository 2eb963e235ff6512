//! Fixed-penalty and primal-dual training loops, evaluation and penalty sweeps.
//!
//! Per episode `k`:
//!
//! 1. roll out one trajectory under `θ^k`;
//! 2. estimate the ascent direction (classic PG plus `λ^k` times a safety
//!    estimator, or classic PG on shaped rewards);
//! 3. `θ^{k+1} = θ^k + η_θ · grad`;
//! 4. if `η_λ > 0`, `λ^{k+1} = [λ^k − η_λ ĝ]_+`;
//! 5. update the critic, log [`Metrics`].
//!
//! A fixed penalty is just `η_λ = 0`, so both variants share this loop.

use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::env::{rollout, Environment, FiniteMdp, NavEnvSpec};
use crate::episode::{Metrics, MetricsTracker, Trajectory, Vec2};
use crate::estimators::{classic_pg_with_rewards, combined_gradient, SafetyCritic, SafetyEstimator};
use crate::oracle::backward_safety;
use crate::policy::{Policy, TabularSoftmaxPolicy};
use crate::rng::{streams, RandomSource};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    ProbSpgReinforce,
    ProbSpgActorCritic,
    CumulativeShaped,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::ProbSpgReinforce => "prob-spg-reinforce",
            Method::ProbSpgActorCritic => "prob-spg-actor-critic",
            Method::CumulativeShaped => "cumulative-shaped",
        }
    }

    pub fn safety_estimator(self) -> Option<SafetyEstimator> {
        match self {
            Method::ProbSpgReinforce => Some(SafetyEstimator::SpgReinforce),
            Method::ProbSpgActorCritic => Some(SafetyEstimator::SpgActorCritic),
            Method::CumulativeShaped => None,
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [Method::ProbSpgReinforce, Method::ProbSpgActorCritic, Method::CumulativeShaped]
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown method `{s}`")))
    }
}

/// Which trajectory feeds `ĝ` in the dual step.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DualRollout {
    /// The episode already used for the primal step.
    #[default]
    Reuse,
    /// A fresh rollout under the updated parameters `θ^{k+1}`.
    Fresh,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainerConfig {
    pub method: Method,
    pub eta_theta: f64,
    /// Zero keeps `penalty` fixed for the whole run.
    pub eta_lambda: f64,
    /// Initial (or fixed) multiplier λ; for `cumulative-shaped` this is μ.
    #[serde(default)]
    pub penalty: f64,
    pub delta: f64,
    pub episodes: u64,
    #[serde(default)]
    pub seed: u64,
    /// Max-norm for the combined gradient; `None` disables clipping.
    #[serde(default)]
    pub clip_norm: Option<f64>,
    #[serde(default)]
    pub dual_rollout: DualRollout,
}

impl TrainerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(self.eta_theta >= 0.0 && self.eta_theta.is_finite()) {
            return bad(format!("eta_theta must be finite and >= 0, got {}", self.eta_theta));
        }
        if !(self.eta_lambda >= 0.0 && self.eta_lambda.is_finite()) {
            return bad(format!("eta_lambda must be finite and >= 0, got {}", self.eta_lambda));
        }
        if !(self.penalty >= 0.0 && self.penalty.is_finite()) {
            return bad(format!("penalty must be finite and >= 0, got {}", self.penalty));
        }
        if !(self.delta > 0.0 && self.delta < 0.5) {
            return bad(format!("delta must lie in (0, 1/2), got {}", self.delta));
        }
        if let Some(c) = self.clip_norm {
            if !(c > 0.0) {
                return bad(format!("clip_norm must be > 0, got {c}"));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DualState {
    pub lambda: f64,
    pub eta_lambda: f64,
}

/// State captured when a gradient or parameter goes non-finite.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DiagnosticDump {
    pub episode: u64,
    pub lambda: f64,
    pub param_norm: f64,
    pub non_finite_entries: usize,
    pub episode_return: f64,
    pub episode_safe: bool,
}

pub fn shaped_reward(r: f64, safe: bool, mu: f64) -> f64 {
    if safe {
        r + mu
    } else {
        r
    }
}

/// `1(all safe) − (1 − δ)`.
pub fn g_hat<S, A>(traj: &Trajectory<S, A>, delta: f64) -> f64 {
    let indicator = if traj.is_safe() { 1.0 } else { 0.0 };
    indicator - (1.0 - delta)
}

pub fn dual_update(dual: DualState, g_hat: f64) -> DualState {
    DualState { lambda: (dual.lambda - dual.eta_lambda * g_hat).max(0.0), ..dual }
}

pub fn primal_update(theta: &mut [f64], grad: &[f64], eta_theta: f64) {
    for (t, g) in theta.iter_mut().zip(grad) {
        *t += eta_theta * g;
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Rescales `grad` in place so that its Euclidean norm is at most `max_norm`.
pub fn clip_to_norm(grad: &mut [f64], max_norm: f64) {
    let n = norm(grad);
    if n > max_norm {
        let scale = max_norm / n;
        grad.iter_mut().for_each(|g| *g *= scale);
    }
}

/// A learned or exact model of `P(S_{t+1..=T} safe | S_t, A_t)` used by SPG-Actor-Critic.
pub trait Critic<E: Environment, P> {
    /// Called with the current policy before the gradient is estimated.
    fn prepare(&mut self, _env: &E, _policy: &P) {}

    fn value(&self, env: &E, t: usize, s: &E::State, a: &E::Action) -> f64;

    /// Called with the episode's trajectory after the primal and dual steps.
    fn learn(&mut self, _env: &E, _traj: &Trajectory<E::State, E::Action>) {}
}

/// Placeholder for methods that never query a critic.
#[derive(Clone, Copy, Debug, Default)]
pub struct NoCritic;

impl<E: Environment, P> Critic<E, P> for NoCritic {
    fn value(&self, _env: &E, _t: usize, _s: &E::State, _a: &E::Action) -> f64 {
        panic!("this method does not use a critic")
    }
}

impl<P> Critic<NavEnvSpec, P> for SafetyCritic {
    fn value(&self, env: &NavEnvSpec, _t: usize, s: &Vec2, a: &Vec2) -> f64 {
        self.estimate(env, *s, *a)
    }

    fn learn(&mut self, env: &NavEnvSpec, traj: &Trajectory<Vec2, Vec2>) {
        *self = self.update(traj, env);
    }
}

/// Exact backward-induction table, recomputed for the current policy every episode.
#[derive(Clone, Debug, Default)]
pub struct ExactCritic {
    q: Vec<Vec<f64>>,
    n_actions: usize,
}

impl Critic<FiniteMdp, TabularSoftmaxPolicy> for ExactCritic {
    fn prepare(&mut self, env: &FiniteMdp, policy: &TabularSoftmaxPolicy) {
        self.q = backward_safety(env, &policy.table());
        self.n_actions = env.n_actions();
    }

    fn value(&self, _env: &FiniteMdp, t: usize, s: &usize, a: &usize) -> f64 {
        self.q[t][s * self.n_actions + a]
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome<P> {
    pub policy: P,
    pub metrics: Vec<Metrics>,
    pub dual: DualState,
}

/// One full run, keeping every episode's metrics.
pub fn train<E, P, C>(config: &TrainerConfig, env: &E, policy: P, critic: &mut C) -> Result<TrainOutcome<P>>
where
    E: Environment,
    P: Policy<State = E::State, Action = E::Action>,
    C: Critic<E, P>,
{
    let mut metrics = Vec::with_capacity(config.episodes.min(1 << 24) as usize);
    let (policy, dual) = train_with(config, env, policy, critic, |m, _| {
        metrics.push(*m);
        Ok(())
    })?;
    Ok(TrainOutcome { policy, metrics, dual })
}

/// One full run; `on_episode` sees each episode's metrics and the updated policy.
pub fn train_with<E, P, C, F>(config: &TrainerConfig, env: &E, mut policy: P, critic: &mut C, mut on_episode: F) -> Result<(P, DualState)>
where
    E: Environment,
    P: Policy<State = E::State, Action = E::Action>,
    C: Critic<E, P>,
    F: FnMut(&Metrics, &P) -> Result<()>,
{
    config.validate()?;
    let horizon = env.horizon();
    let mut dual = DualState { lambda: config.penalty, eta_lambda: config.eta_lambda };
    let mut tracker = MetricsTracker::new();
    let shaping_weight = config.penalty / (horizon as f64 + 1.0);

    for episode in 0..config.episodes {
        let mut rng = RandomSource::new(config.seed, streams::TRAIN + episode);
        let traj = rollout(env, &policy, &mut rng)?;

        let mut grad = match config.method.safety_estimator() {
            Some(estimator) => {
                critic.prepare(env, &policy);
                let critic_ref = &*critic;
                combined_gradient(&traj, &policy, dual.lambda, estimator, |t, s, a| critic_ref.value(env, t, s, a))?.combined
            }
            None => {
                let shaped: Vec<f64> =
                    traj.rewards.iter().zip(&traj.safe_flags).map(|(&r, &safe)| shaped_reward(r, safe, shaping_weight)).collect();
                classic_pg_with_rewards(&traj, &policy, &shaped)
            }
        };

        let non_finite = grad.iter().filter(|g| !g.is_finite()).count();
        if non_finite > 0 {
            return Err(Error::NonFiniteGradient(Box::new(DiagnosticDump {
                episode,
                lambda: dual.lambda,
                param_norm: norm(policy.params()),
                non_finite_entries: non_finite,
                episode_return: traj.episode_return(),
                episode_safe: traj.is_safe(),
            })));
        }
        if let Some(max_norm) = config.clip_norm {
            clip_to_norm(&mut grad, max_norm);
        }
        primal_update(policy.params_mut(), &grad, config.eta_theta);

        if config.eta_lambda > 0.0 {
            let g = match config.method {
                Method::CumulativeShaped => cumulative_slack(&traj, config.delta),
                _ => match config.dual_rollout {
                    DualRollout::Reuse => g_hat(&traj, config.delta),
                    DualRollout::Fresh => {
                        let mut dual_rng = RandomSource::new(config.seed, streams::DUAL + episode);
                        g_hat(&rollout(env, &policy, &mut dual_rng)?, config.delta)
                    }
                },
            };
            dual = dual_update(dual, g);
        }

        if config.method == Method::ProbSpgActorCritic {
            critic.learn(env, &traj);
        }

        let m = tracker.record(traj.episode_return(), traj.is_safe(), dual.lambda);
        on_episode(&m, &policy)?;
    }
    Ok((policy, dual))
}

/// Single-episode estimate of `V_c − (1 − δ/(T+1))`, the mirror-problem slack.
pub fn cumulative_slack<S, A>(traj: &Trajectory<S, A>, delta: f64) -> f64 {
    let n = traj.safe_flags.len() as f64;
    let frac = traj.safe_flags.iter().filter(|&&f| f).count() as f64 / n;
    frac - (1.0 - delta / n)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub mean_return: f64,
    pub safety: f64,
    pub episodes: usize,
}

/// Per-episode `(return, safe)` pairs of `n_episodes` rollouts without learning.
/// Episode `i` draws from stream `EVAL + i` of `seed`.
pub fn evaluate_episodes<E, P>(policy: &P, env: &E, n_episodes: usize, seed: u64) -> Result<Vec<(f64, bool)>>
where
    E: Environment,
    P: Policy<State = E::State, Action = E::Action>,
{
    (0..n_episodes)
        .map(|i| {
            let mut rng = RandomSource::new(seed, streams::EVAL + i as u64);
            let traj = rollout(env, policy, &mut rng)?;
            Ok((traj.episode_return(), traj.is_safe()))
        })
        .collect()
}

pub fn evaluate<E, P>(policy: &P, env: &E, n_episodes: usize, seed: u64) -> Result<EvalSummary>
where
    E: Environment,
    P: Policy<State = E::State, Action = E::Action>,
{
    if n_episodes == 0 {
        return Err(Error::InvalidInput("evaluation needs at least one episode".into()));
    }
    let rows = evaluate_episodes(policy, env, n_episodes, seed)?;
    Ok(summarize(&rows))
}

pub fn summarize(rows: &[(f64, bool)]) -> EvalSummary {
    let n = rows.len() as f64;
    EvalSummary {
        mean_return: rows.iter().map(|r| r.0).sum::<f64>() / n,
        safety: rows.iter().filter(|r| r.1).count() as f64 / n,
        episodes: rows.len(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub method: Method,
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub method: Method,
    pub weight: f64,
    pub run: usize,
    pub eval_return: f64,
    pub eval_safety: f64,
    pub lambda_final: f64,
    /// `eval_return + λ̂ · δ̂ · T/(T+1)` with `λ̂ = μ` and `δ̂ = 1 − eval_safety`; cumulative rows only.
    pub bound_upper: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct SweepSpec {
    pub base: TrainerConfig,
    pub points: Vec<SweepPoint>,
    pub runs: usize,
    pub eval_episodes: usize,
}

/// Trains every `(point, run)` pair with a fixed penalty and evaluates it. Runs
/// execute in parallel; rows come back in `(point, run)` order. Run `r` uses
/// seed `base.seed + r`. Evaluation rolls out in `eval_env`, which may differ
/// from `env` only in its start distribution.
pub fn sweep<E, P, C, FP, FC>(spec: &SweepSpec, env: &E, eval_env: &E, make_policy: FP, make_critic: FC) -> Result<Vec<SweepRow>>
where
    E: Environment + Sync,
    P: Policy<State = E::State, Action = E::Action> + Send,
    C: Critic<E, P>,
    FP: Fn() -> P + Sync,
    FC: Fn() -> C + Sync,
{
    if spec.points.is_empty() {
        return Err(Error::InvalidInput("sweep grid is empty".into()));
    }
    if spec.runs == 0 {
        return Err(Error::InvalidInput("sweep needs at least one run per point".into()));
    }
    let horizon = env.horizon() as f64;
    let jobs: Vec<(SweepPoint, usize)> = spec.points.iter().flat_map(|&p| (0..spec.runs).map(move |r| (p, r))).collect();
    jobs.par_iter()
        .map(|&(point, run)| {
            let config = TrainerConfig {
                method: point.method,
                penalty: point.weight,
                eta_lambda: 0.0,
                seed: spec.base.seed + run as u64,
                ..spec.base.clone()
            };
            let mut critic = make_critic();
            let (policy, dual) = train_with(&config, env, make_policy(), &mut critic, |_, _| Ok(()))?;
            let eval = evaluate(&policy, eval_env, spec.eval_episodes, config.seed)?;
            let bound_upper = (point.method == Method::CumulativeShaped)
                .then(|| eval.mean_return + point.weight * (1.0 - eval.safety) * horizon / (horizon + 1.0));
            Ok(SweepRow {
                method: point.method,
                weight: point.weight,
                run,
                eval_return: eval.mean_return,
                eval_safety: eval.safety,
                lambda_final: dual.lambda,
                bound_upper,
            })
        })
        .collect()
}
