//! Environments: the planar obstacle-navigation task and enumerable finite MDPs.

mod finite;
mod nav;

pub use finite::{enumerate_trajectories, for_each_trajectory, policy_table_is_valid, FiniteMdp, PolicyTable, DEFAULT_ENUMERATION_CAP};
pub use nav::{NavEnvSpec, Obstacle, StartDistribution, MAP_MAX, MAP_MIN};

use crate::episode::Trajectory;
use crate::policy::Policy;
use crate::rng::RandomSource;
use crate::Result;

/// Finite-horizon, undiscounted episodic environment with a safe-set predicate.
pub trait Environment {
    type State: Clone + std::fmt::Debug;
    type Action: Clone + std::fmt::Debug;

    fn horizon(&self) -> usize;

    fn initial_state(&self, rng: &mut RandomSource) -> Result<Self::State>;

    fn step(&self, s: &Self::State, a: &Self::Action, rng: &mut RandomSource) -> Result<Self::State>;

    fn reward(&self, s: &Self::State) -> f64;

    fn is_safe(&self, s: &Self::State) -> bool;
}

/// Runs one full-horizon episode. Safety violations are recorded, never terminal.
pub fn rollout<E, P>(env: &E, policy: &P, rng: &mut RandomSource) -> Result<Trajectory<E::State, E::Action>>
where
    E: Environment,
    P: Policy<State = E::State, Action = E::Action>,
{
    let horizon = env.horizon();
    let mut states = Vec::with_capacity(horizon + 1);
    let mut actions = Vec::with_capacity(horizon);
    let mut rewards = Vec::with_capacity(horizon + 1);
    let mut safe_flags = Vec::with_capacity(horizon + 1);

    let mut s = env.initial_state(rng)?;
    for _ in 0..horizon {
        rewards.push(env.reward(&s));
        safe_flags.push(env.is_safe(&s));
        let a = policy.sample_action(&s, rng);
        let next = env.step(&s, &a, rng)?;
        states.push(s);
        actions.push(a);
        s = next;
    }
    rewards.push(env.reward(&s));
    safe_flags.push(env.is_safe(&s));
    states.push(s);

    Ok(Trajectory { states, actions, rewards, safe_flags })
}
