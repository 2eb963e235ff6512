//! Episode records and per-episode bookkeeping shared by every module.

use serde::{Deserialize, Serialize};

/// Planar point in map units. Used both for navigation states and velocities.
pub type Vec2 = [f64; 2];

/// One finite-horizon episode.
///
/// `states`, `rewards` and `safe_flags` have `T + 1` entries (one per visited
/// state, including `S_0` and `S_T`); `actions` has `T`.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory<S, A> {
    pub states: Vec<S>,
    pub actions: Vec<A>,
    pub rewards: Vec<f64>,
    pub safe_flags: Vec<bool>,
}

impl<S, A> Trajectory<S, A> {
    pub fn horizon(&self) -> usize {
        self.actions.len()
    }

    /// Checks the length relations between the four arrays.
    pub fn is_well_formed(&self) -> bool {
        let n = self.actions.len() + 1;
        self.states.len() == n && self.rewards.len() == n && self.safe_flags.len() == n
    }

    pub fn episode_return(&self) -> f64 {
        episode_return(&self.rewards)
    }

    pub fn is_safe(&self) -> bool {
        is_safe_episode(&self.safe_flags)
    }
}

/// Sum of all logged rewards, `t = 0..=T`.
pub fn episode_return(rewards: &[f64]) -> f64 {
    rewards.iter().sum()
}

/// True iff every visited state was safe.
pub fn is_safe_episode(safe_flags: &[bool]) -> bool {
    safe_flags.iter().all(|&f| f)
}

/// Incremental arithmetic mean: `(prev * k + new) / (k + 1)`.
pub fn update_running_average(prev_avg: f64, k: u64, new_value: f64) -> f64 {
    (prev_avg * k as f64 + new_value) / (k as f64 + 1.0)
}

/// Per-episode record emitted by the trainers.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub episode: u64,
    pub episode_return: f64,
    pub safe: bool,
    pub avg_return: f64,
    pub avg_safety: f64,
    pub lambda: f64,
}

/// Running averages over episodes `0..=k`.
#[derive(Clone, Debug, Default)]
pub struct MetricsTracker {
    count: u64,
    avg_return: f64,
    avg_safety: f64,
}

impl MetricsTracker {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, episode_return: f64, safe: bool, lambda: f64) -> Metrics {
        let k = self.count;
        self.avg_return = update_running_average(self.avg_return, k, episode_return);
        self.avg_safety = update_running_average(self.avg_safety, k, if safe { 1.0 } else { 0.0 });
        self.count += 1;
        Metrics {
            episode: k,
            episode_return,
            safe,
            avg_return: self.avg_return,
            avg_safety: self.avg_safety,
            lambda,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn returns() {
        assert_eq!(episode_return(&[0.0, 0.0, 0.0]), 0.0);
        assert_eq!(episode_return(&[-1.0, -1.0, -1.0]), -3.0);
    }

    #[test]
    fn safety_is_a_conjunction() {
        assert!(is_safe_episode(&[true, true, true]));
        assert!(!is_safe_episode(&[true, true, false]));
        assert!(!is_safe_episode(&[true, false, true]));
    }

    #[test]
    fn running_average() {
        assert_eq!(update_running_average(0.0, 0, 5.0), 5.0);
        assert_eq!(update_running_average(5.0, 1, 3.0), 4.0);
        assert_eq!(update_running_average(4.0, 3, 0.0), 3.0);
    }

    #[test]
    fn tracker_matches_batch_means() {
        let mut tr = MetricsTracker::new();
        let rets = [1.0, -2.0, 4.0, 0.5];
        let safe = [true, false, true, true];
        let mut last = None;
        for (r, s) in rets.iter().zip(safe) {
            last = Some(tr.record(*r, s, 0.0));
        }
        let m = last.unwrap();
        assert_eq!(m.episode, 3);
        assert!((m.avg_return - 0.875).abs() < 1e-15);
        assert!((m.avg_safety - 0.75).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn safety_equals_indicator_product(flags in proptest::collection::vec(any::<bool>(), 1..30)) {
            let product: u8 = flags.iter().map(|&f| f as u8).product();
            prop_assert_eq!(is_safe_episode(&flags), product == 1);
        }
    }
}
