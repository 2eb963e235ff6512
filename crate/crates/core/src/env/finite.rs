//! Enumerable finite MDPs with state rewards and a safe-state mask.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::Environment;
use crate::episode::Trajectory;
use crate::rng::RandomSource;
use crate::{Error, Result};

pub const DEFAULT_ENUMERATION_CAP: u128 = 10_000_000;

const ROW_SUM_TOL: f64 = 1e-12;

/// Nested-array form used for (de)serialisation.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FiniteMdpRaw {
    pub horizon: usize,
    /// `transition[s][a][s']`
    pub transition: Vec<Vec<Vec<f64>>>,
    pub reward: Vec<f64>,
    pub safe: Vec<bool>,
    pub initial: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FiniteMdpRaw", into = "FiniteMdpRaw")]
pub struct FiniteMdp {
    n_states: usize,
    n_actions: usize,
    horizon: usize,
    transition: Vec<f64>,
    reward: Vec<f64>,
    safe: Vec<bool>,
    initial: Vec<f64>,
}

impl TryFrom<FiniteMdpRaw> for FiniteMdp {
    type Error = Error;

    fn try_from(raw: FiniteMdpRaw) -> Result<Self> {
        let n_states = raw.transition.len();
        if n_states == 0 {
            return Err(Error::InvalidMdp("no states".into()));
        }
        let n_actions = raw.transition[0].len();
        let mut flat = Vec::with_capacity(n_states * n_actions * n_states);
        for (s, rows) in raw.transition.iter().enumerate() {
            if rows.len() != n_actions {
                return Err(Error::InvalidMdp(format!("state {s} has {} actions, expected {n_actions}", rows.len())));
            }
            for (a, row) in rows.iter().enumerate() {
                if row.len() != n_states {
                    return Err(Error::InvalidMdp(format!("row ({s}, {a}) has {} entries, expected {n_states}", row.len())));
                }
                flat.extend_from_slice(row);
            }
        }
        FiniteMdp::new(n_states, n_actions, raw.horizon, flat, raw.reward, raw.safe, raw.initial)
    }
}

impl From<FiniteMdp> for FiniteMdpRaw {
    fn from(m: FiniteMdp) -> Self {
        let transition = (0..m.n_states)
            .map(|s| (0..m.n_actions).map(|a| m.transition_row(s, a).to_vec()).collect())
            .collect();
        FiniteMdpRaw { horizon: m.horizon, transition, reward: m.reward, safe: m.safe, initial: m.initial }
    }
}

impl FiniteMdp {
    /// Builds and validates an MDP. `transition` is row-major `[s][a][s']`.
    pub fn new(
        n_states: usize,
        n_actions: usize,
        horizon: usize,
        transition: Vec<f64>,
        reward: Vec<f64>,
        safe: Vec<bool>,
        initial: Vec<f64>,
    ) -> Result<Self> {
        let m = Self { n_states, n_actions, horizon, transition, reward, safe, initial };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        let (ns, na) = (self.n_states, self.n_actions);
        if ns == 0 || na == 0 {
            return Err(Error::InvalidMdp("need at least one state and one action".into()));
        }
        if self.horizon == 0 {
            return Err(Error::InvalidMdp("horizon must be positive".into()));
        }
        if self.transition.len() != ns * na * ns {
            return Err(Error::InvalidMdp(format!("transition table has {} entries, expected {}", self.transition.len(), ns * na * ns)));
        }
        if self.reward.len() != ns || self.safe.len() != ns || self.initial.len() != ns {
            return Err(Error::InvalidMdp("reward, safe and initial tables need one entry per state".into()));
        }
        if !self.reward.iter().all(|r| r.is_finite()) {
            return Err(Error::InvalidMdp("non-finite reward".into()));
        }
        check_distribution(&self.initial, "initial distribution")?;
        for s in 0..ns {
            for a in 0..na {
                check_distribution(self.transition_row(s, a), &format!("transition row ({s}, {a})"))?;
            }
        }
        Ok(())
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn transition_row(&self, s: usize, a: usize) -> &[f64] {
        let start = (s * self.n_actions + a) * self.n_states;
        &self.transition[start..start + self.n_states]
    }

    pub fn transition_prob(&self, s: usize, a: usize, next: usize) -> f64 {
        self.transition_row(s, a)[next]
    }

    pub fn state_reward(&self, s: usize) -> f64 {
        self.reward[s]
    }

    pub fn is_safe_state(&self, s: usize) -> bool {
        self.safe[s]
    }

    pub fn safe_mask(&self) -> &[bool] {
        &self.safe
    }

    pub fn initial(&self) -> &[f64] {
        &self.initial
    }

    /// True when the initial distribution puts no mass on unsafe states.
    pub fn starts_safe(&self) -> bool {
        self.initial.iter().zip(&self.safe).all(|(&p, &safe)| safe || p == 0.0)
    }

    /// Upper bound on the number of trajectories: `|S|·(|S|·|A|)^T`.
    pub fn trajectory_count_bound(&self) -> u128 {
        let branch = (self.n_states * self.n_actions) as u128;
        let mut n = self.n_states as u128;
        for _ in 0..self.horizon {
            n = n.saturating_mul(branch);
        }
        n
    }

    /// Stable digest of the full model, used to tie checkpoints to environments.
    pub fn hash_hex(&self) -> String {
        let mut h = Sha256::new();
        h.update(b"finite/v1");
        for n in [self.n_states, self.n_actions, self.horizon] {
            h.update((n as u64).to_le_bytes());
        }
        for v in self.transition.iter().chain(&self.reward).chain(&self.initial) {
            h.update(v.to_bits().to_le_bytes());
        }
        h.update(self.safe.iter().map(|&b| b as u8).collect::<Vec<_>>());
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn with_horizon(&self, horizon: usize) -> Result<Self> {
        let mut m = self.clone();
        m.horizon = horizon;
        m.validate()?;
        Ok(m)
    }

    pub fn with_transition(&self, s: usize, a: usize, row: &[f64]) -> Result<Self> {
        let mut m = self.clone();
        let start = (s * self.n_actions + a) * self.n_states;
        m.transition[start..start + self.n_states].copy_from_slice(row);
        m.validate()?;
        Ok(m)
    }

    /// Two safe states, both actions keep the agent safe. Degenerate for every safety statistic.
    pub fn always_safe() -> Self {
        let t = vec![
            0.7, 0.3, //
            0.2, 0.8, //
            0.5, 0.5, //
            0.9, 0.1,
        ];
        Self::new(2, 2, 3, t, vec![0.0, 1.0], vec![true, true], vec![0.6, 0.4]).expect("valid builtin")
    }

    /// State 0 is safe and unrewarded, state 1 is unsafe and pays 1.
    /// Action 0 stays in state 0; action 1 is the risky action (reaches state 1 with probability 0.5).
    /// From state 1, action 0 returns home and action 1 stays.
    pub fn risky_two_state() -> Self {
        let t = vec![
            1.0, 0.0, //
            0.5, 0.5, //
            1.0, 0.0, //
            0.0, 1.0,
        ];
        Self::new(2, 2, 2, t, vec![0.0, 1.0], vec![true, false], vec![1.0, 0.0]).expect("valid builtin")
    }

    /// Start (safe, r=0), goal (safe, r=1, absorbing) and hazard (unsafe, r=0).
    /// The cautious action creeps towards the goal; the risky one jumps but may hit the hazard.
    pub fn risky_goal() -> Self {
        let t = vec![
            0.8, 0.2, 0.0, //
            0.0, 0.6, 0.4, //
            0.0, 1.0, 0.0, //
            0.0, 1.0, 0.0, //
            1.0, 0.0, 0.0, //
            0.5, 0.0, 0.5,
        ];
        Self::new(3, 2, 3, t, vec![0.0, 1.0, 0.0], vec![true, true, false], vec![1.0, 0.0, 0.0]).expect("valid builtin")
    }

    /// Random 3-state, 2-action instance with horizon 4, seeded, starting in a safe state.
    pub fn random_instance(seed: u64) -> Self {
        Self::random(seed, 3, 2, 4)
    }

    /// Random dense instance. State 0 is always safe and carries all initial mass;
    /// the last state is always unsafe.
    pub fn random(seed: u64, n_states: usize, n_actions: usize, horizon: usize) -> Self {
        let mut rng = RandomSource::new(seed, crate::rng::streams::AUX);
        let mut t = Vec::with_capacity(n_states * n_actions * n_states);
        for _ in 0..n_states * n_actions {
            let raw: Vec<f64> = (0..n_states).map(|_| 0.05 + rng.uniform()).collect();
            let z: f64 = raw.iter().sum();
            let mut row: Vec<f64> = raw.iter().map(|x| x / z).collect();
            let head: f64 = row[..n_states - 1].iter().sum();
            row[n_states - 1] = 1.0 - head;
            t.extend(row);
        }
        let reward = (0..n_states).map(|_| rng.uniform_in(-1.0, 1.0)).collect();
        let safe = (0..n_states).map(|s| s == 0 || (s + 1 < n_states && rng.uniform() < 0.7)).collect();
        let mut initial = vec![0.0; n_states];
        initial[0] = 1.0;
        Self::new(n_states, n_actions, horizon, t, reward, safe, initial).expect("valid random instance")
    }
}

fn check_distribution(row: &[f64], what: &str) -> Result<()> {
    if let Some(p) = row.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::InvalidMdp(format!("{what} has entry {p} outside [0, 1]")));
    }
    let sum: f64 = row.iter().sum();
    if (sum - 1.0).abs() > ROW_SUM_TOL {
        return Err(Error::InvalidMdp(format!("{what} sums to {sum}")));
    }
    Ok(())
}

impl Environment for FiniteMdp {
    type State = usize;
    type Action = usize;

    fn horizon(&self) -> usize {
        self.horizon
    }

    fn initial_state(&self, rng: &mut RandomSource) -> Result<usize> {
        Ok(rng.categorical(&self.initial))
    }

    fn step(&self, s: &usize, a: &usize, rng: &mut RandomSource) -> Result<usize> {
        if *s >= self.n_states || *a >= self.n_actions {
            return Err(Error::InvalidInput(format!("state/action ({s}, {a}) out of range")));
        }
        Ok(rng.categorical(self.transition_row(*s, *a)))
    }

    fn reward(&self, s: &usize) -> f64 {
        self.reward[*s]
    }

    fn is_safe(&self, s: &usize) -> bool {
        self.safe[*s]
    }
}

/// Per-state action distributions, `probs[s * n_actions + a] = π(a | s)`.
#[derive(Clone, Debug, PartialEq)]
pub struct PolicyTable {
    pub n_states: usize,
    pub n_actions: usize,
    pub probs: Vec<f64>,
}

impl PolicyTable {
    pub fn uniform(n_states: usize, n_actions: usize) -> Self {
        Self { n_states, n_actions, probs: vec![1.0 / n_actions as f64; n_states * n_actions] }
    }

    pub fn prob(&self, s: usize, a: usize) -> f64 {
        self.probs[s * self.n_actions + a]
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.probs[s * self.n_actions..(s + 1) * self.n_actions]
    }
}

pub fn policy_table_is_valid(mdp: &FiniteMdp, table: &PolicyTable) -> bool {
    table.n_states == mdp.n_states
        && table.n_actions == mdp.n_actions
        && (0..table.n_states).all(|s| {
            let row = table.row(s);
            row.iter().all(|p| (0.0..=1.0).contains(p)) && (row.iter().sum::<f64>() - 1.0).abs() <= 1e-12
        })
}

/// Visits every positive-probability trajectory exactly once, depth first.
///
/// The trajectory buffer handed to `visit` is reused between calls.
pub fn for_each_trajectory<F>(mdp: &FiniteMdp, table: &PolicyTable, cap: u128, mut visit: F) -> Result<()>
where
    F: FnMut(&Trajectory<usize, usize>, f64),
{
    let bound = mdp.trajectory_count_bound();
    if bound > cap {
        return Err(Error::EnumerationCap { required: bound, cap });
    }
    if !policy_table_is_valid(mdp, table) {
        return Err(Error::InvalidInput("policy table does not match the MDP or is not a distribution".into()));
    }
    let horizon = mdp.horizon;
    let mut traj = Trajectory {
        states: vec![0; horizon + 1],
        actions: vec![0; horizon],
        rewards: vec![0.0; horizon + 1],
        safe_flags: vec![false; horizon + 1],
    };
    for s0 in 0..mdp.n_states {
        let p0 = mdp.initial[s0];
        if p0 == 0.0 {
            continue;
        }
        place_state(mdp, &mut traj, 0, s0);
        descend(mdp, table, &mut traj, 0, p0, &mut visit);
    }
    Ok(())
}

fn place_state(mdp: &FiniteMdp, traj: &mut Trajectory<usize, usize>, t: usize, s: usize) {
    traj.states[t] = s;
    traj.rewards[t] = mdp.reward[s];
    traj.safe_flags[t] = mdp.safe[s];
}

fn descend<F>(mdp: &FiniteMdp, table: &PolicyTable, traj: &mut Trajectory<usize, usize>, t: usize, prob: f64, visit: &mut F)
where
    F: FnMut(&Trajectory<usize, usize>, f64),
{
    if t == mdp.horizon {
        visit(traj, prob);
        return;
    }
    let s = traj.states[t];
    for a in 0..mdp.n_actions {
        let pa = table.prob(s, a);
        if pa == 0.0 {
            continue;
        }
        traj.actions[t] = a;
        for next in 0..mdp.n_states {
            let pn = mdp.transition_prob(s, a, next);
            if pn == 0.0 {
                continue;
            }
            place_state(mdp, traj, t + 1, next);
            descend(mdp, table, traj, t + 1, prob * pa * pn, visit);
        }
    }
}

/// Every positive-probability trajectory with its probability.
pub fn enumerate_trajectories(mdp: &FiniteMdp, table: &PolicyTable, cap: u128) -> Result<Vec<(Trajectory<usize, usize>, f64)>> {
    let mut out = Vec::new();
    for_each_trajectory(mdp, table, cap, |traj, p| out.push((traj.clone(), p)))?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn single() -> FiniteMdp {
        FiniteMdp::new(1, 1, 2, vec![1.0], vec![0.5], vec![true], vec![1.0]).unwrap()
    }

    #[test]
    fn single_trajectory() {
        let m = single();
        let all = enumerate_trajectories(&m, &PolicyTable::uniform(1, 1), DEFAULT_ENUMERATION_CAP).unwrap();
        assert_eq!(all.len(), 1);
        assert_eq!(all[0].1, 1.0);
        assert_eq!(all[0].0.states, vec![0, 0, 0]);
    }

    #[test]
    fn two_state_uniform_transitions() {
        let m = FiniteMdp::new(2, 1, 1, vec![0.5, 0.5, 0.5, 0.5], vec![0.0, 0.0], vec![true, true], vec![0.3, 0.7]).unwrap();
        let all = enumerate_trajectories(&m, &PolicyTable::uniform(2, 1), DEFAULT_ENUMERATION_CAP).unwrap();
        assert_eq!(all.len(), 4);
        for (traj, p) in &all {
            let mu = m.initial()[traj.states[0]];
            assert!((p - 0.5 * mu).abs() < 1e-15);
        }
    }

    #[test]
    fn random_instance_probabilities_sum_to_one() {
        let m = FiniteMdp::random(11, 3, 2, 3);
        let table = PolicyTable { n_states: 3, n_actions: 2, probs: vec![0.3, 0.7, 0.5, 0.5, 0.9, 0.1] };
        let all = enumerate_trajectories(&m, &table, DEFAULT_ENUMERATION_CAP).unwrap();
        let total: f64 = all.iter().map(|(_, p)| p).sum();
        assert!((total - 1.0).abs() < 1e-10);
        let distinct: HashSet<_> = all.iter().map(|(t, _)| (t.states.clone(), t.actions.clone())).collect();
        assert_eq!(distinct.len(), all.len());
        for (t, _) in &all {
            assert!(t.is_well_formed());
        }
    }

    #[test]
    fn cap_is_enforced() {
        let m = FiniteMdp::random(1, 3, 2, 4);
        let err = enumerate_trajectories(&m, &PolicyTable::uniform(3, 2), 100).unwrap_err();
        assert!(matches!(err, Error::EnumerationCap { .. }));
    }

    #[test]
    fn tampered_rows_are_rejected() {
        let m = FiniteMdp::risky_two_state();
        assert!(matches!(m.with_transition(0, 1, &[0.5, 0.6]), Err(Error::InvalidMdp(_))));
        assert!(matches!(m.with_transition(0, 1, &[1.5, -0.5]), Err(Error::InvalidMdp(_))));
    }

    #[test]
    fn builtins_start_safe() {
        for m in [FiniteMdp::always_safe(), FiniteMdp::risky_two_state(), FiniteMdp::risky_goal(), FiniteMdp::random_instance(5)] {
            assert!(m.starts_safe());
        }
    }

    #[test]
    fn toml_round_trip() {
        let m = FiniteMdp::risky_goal();
        let text = toml::to_string(&m).unwrap();
        let back: FiniteMdp = toml::from_str(&text).unwrap();
        assert_eq!(m, back);
        let bad = text.replace("0.6", "0.7");
        assert!(toml::from_str::<FiniteMdp>(&bad).is_err());
    }
}
