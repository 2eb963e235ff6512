//! Planar navigation among obstacles on the `[0, 10]²` map.
//!
//! Dynamics are `s' = clamp(s + a·T_s)`; the reward is the negative squared
//! distance to the goal; the safe set is the map minus the closed obstacles.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::Environment;
use crate::episode::Vec2;
use crate::rng::RandomSource;
use crate::{Error, Result};

pub const MAP_MIN: f64 = 0.0;
pub const MAP_MAX: f64 = 10.0;

const MAX_REJECTION_DRAWS: usize = 1_000_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Obstacle {
    Circle { center: Vec2, radius: f64 },
    Rect { min: Vec2, max: Vec2 },
}

impl Obstacle {
    /// Signed distance to the boundary: negative inside, zero on it.
    pub fn signed_distance(&self, s: Vec2) -> f64 {
        match *self {
            Obstacle::Circle { center, radius } => {
                let dx = s[0] - center[0];
                let dy = s[1] - center[1];
                dx.hypot(dy) - radius
            }
            Obstacle::Rect { min, max } => {
                let dx = (min[0] - s[0]).max(s[0] - max[0]);
                let dy = (min[1] - s[1]).max(s[1] - max[1]);
                let outside = dx.max(0.0).hypot(dy.max(0.0));
                let inside = dx.max(dy).min(0.0);
                outside + inside
            }
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Obstacle::Circle { center, radius } => {
                if !(radius > 0.0) || !center.iter().all(|c| c.is_finite()) {
                    return Err(Error::InvalidInput(format!("circle obstacle needs radius > 0, got {radius}")));
                }
            }
            Obstacle::Rect { min, max } => {
                if !(min[0] < max[0] && min[1] < max[1]) {
                    return Err(Error::InvalidInput(format!("rectangle needs min < max componentwise, got {min:?} / {max:?}")));
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum StartDistribution {
    /// Uniform over the safe set, by rejection sampling on the map.
    UniformSafe,
    /// Uniform over a fixed list of start points.
    Fixed { points: Vec<Vec2> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NavEnvSpec {
    pub obstacles: Vec<Obstacle>,
    pub goal: Vec2,
    pub step_size: f64,
    pub horizon: usize,
    pub start: StartDistribution,
}

impl NavEnvSpec {
    /// Five-obstacle layout (three circles, two rectangles) placed between the
    /// start points (1,1), (1,9), (2,5), (8,9) and the goal (8.5, 1.5).
    pub fn five_obstacles() -> Self {
        Self {
            obstacles: vec![
                Obstacle::Circle { center: [4.5, 1.5], radius: 1.0 },
                Obstacle::Circle { center: [5.0, 5.0], radius: 1.2 },
                Obstacle::Circle { center: [2.5, 7.5], radius: 0.8 },
                Obstacle::Rect { min: [7.5, 4.5], max: [9.5, 5.5] },
                Obstacle::Rect { min: [2.5, 3.0], max: [4.0, 3.8] },
            ],
            goal: [8.5, 1.5],
            step_size: 0.05,
            horizon: 20,
            start: StartDistribution::UniformSafe,
        }
    }

    /// One circle of radius 2 at (5, 5), horizon 100.
    pub fn single_obstacle() -> Self {
        Self {
            obstacles: vec![Obstacle::Circle { center: [5.0, 5.0], radius: 2.0 }],
            goal: [8.5, 1.5],
            step_size: 0.05,
            horizon: 100,
            start: StartDistribution::UniformSafe,
        }
    }

    pub fn obstacle_free() -> Self {
        Self { obstacles: Vec::new(), ..Self::five_obstacles() }
    }

    /// The four start points used for trajectory visualisation.
    pub fn reference_starts() -> Vec<Vec2> {
        vec![[1.0, 1.0], [1.0, 9.0], [2.0, 5.0], [8.0, 9.0]]
    }

    pub fn validate(&self) -> Result<()> {
        for o in &self.obstacles {
            o.validate()?;
        }
        if !(self.step_size > 0.0) {
            return Err(Error::InvalidInput(format!("step size must be > 0, got {}", self.step_size)));
        }
        if self.horizon == 0 {
            return Err(Error::InvalidInput("horizon must be positive".into()));
        }
        if !self.is_safe_state(self.goal) {
            return Err(Error::InvalidInput(format!("goal {:?} is not in the safe set", self.goal)));
        }
        if let StartDistribution::Fixed { points } = &self.start {
            if points.is_empty() {
                return Err(Error::InvalidInput("fixed start list is empty".into()));
            }
        }
        Ok(())
    }

    pub fn nav_step(&self, s: Vec2, a: Vec2) -> Result<Vec2> {
        if !a.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite action {a:?}")));
        }
        Ok([
            (s[0] + a[0] * self.step_size).clamp(MAP_MIN, MAP_MAX),
            (s[1] + a[1] * self.step_size).clamp(MAP_MIN, MAP_MAX),
        ])
    }

    pub fn nav_reward(&self, s: Vec2) -> f64 {
        let dx = s[0] - self.goal[0];
        let dy = s[1] - self.goal[1];
        -(dx * dx + dy * dy)
    }

    pub fn in_map(s: Vec2) -> bool {
        s.iter().all(|&c| (MAP_MIN..=MAP_MAX).contains(&c))
    }

    /// Inside the map and strictly outside every obstacle.
    pub fn is_safe_state(&self, s: Vec2) -> bool {
        Self::in_map(s) && self.obstacles.iter().all(|o| o.signed_distance(s) > 0.0)
    }

    /// Smallest signed boundary distance over all obstacles (`+∞` without obstacles).
    pub fn min_obstacle_distance(&self, s: Vec2) -> f64 {
        self.obstacles.iter().map(|o| o.signed_distance(s)).fold(f64::INFINITY, f64::min)
    }

    /// Stable digest of the layout, used to tie checkpoints to environments.
    pub fn hash_hex(&self) -> String {
        let mut h = Sha256::new();
        h.update(b"nav/v1");
        for o in &self.obstacles {
            match o {
                Obstacle::Circle { center, radius } => {
                    h.update(b"c");
                    for v in [center[0], center[1], *radius] {
                        h.update(v.to_bits().to_le_bytes());
                    }
                }
                Obstacle::Rect { min, max } => {
                    h.update(b"r");
                    for v in [min[0], min[1], max[0], max[1]] {
                        h.update(v.to_bits().to_le_bytes());
                    }
                }
            }
        }
        for v in [self.goal[0], self.goal[1], self.step_size] {
            h.update(v.to_bits().to_le_bytes());
        }
        h.update((self.horizon as u64).to_le_bytes());
        match &self.start {
            StartDistribution::UniformSafe => h.update(b"u"),
            StartDistribution::Fixed { points } => {
                h.update(b"f");
                for p in points {
                    h.update(p[0].to_bits().to_le_bytes());
                    h.update(p[1].to_bits().to_le_bytes());
                }
            }
        }
        let digest = h.finalize();
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

impl Environment for NavEnvSpec {
    type State = Vec2;
    type Action = Vec2;

    fn horizon(&self) -> usize {
        self.horizon
    }

    fn initial_state(&self, rng: &mut RandomSource) -> Result<Vec2> {
        match &self.start {
            StartDistribution::Fixed { points } => {
                let i = ((rng.uniform() * points.len() as f64) as usize).min(points.len() - 1);
                Ok(points[i])
            }
            StartDistribution::UniformSafe => {
                for _ in 0..MAX_REJECTION_DRAWS {
                    let s = [rng.uniform_in(MAP_MIN, MAP_MAX), rng.uniform_in(MAP_MIN, MAP_MAX)];
                    if self.is_safe_state(s) {
                        return Ok(s);
                    }
                }
                Err(Error::InvalidInput("safe set is empty or too small for rejection sampling".into()))
            }
        }
    }

    fn step(&self, s: &Vec2, a: &Vec2, _rng: &mut RandomSource) -> Result<Vec2> {
        self.nav_step(*s, *a)
    }

    fn reward(&self, s: &Vec2) -> f64 {
        self.nav_reward(*s)
    }

    fn is_safe(&self, s: &Vec2) -> bool {
        self.is_safe_state(*s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn one_circle() -> NavEnvSpec {
        NavEnvSpec { obstacles: vec![Obstacle::Circle { center: [5.0, 5.0], radius: 2.0 }], ..NavEnvSpec::five_obstacles() }
    }

    fn close(a: Vec2, b: Vec2) -> bool {
        (a[0] - b[0]).abs() < 1e-12 && (a[1] - b[1]).abs() < 1e-12
    }

    #[test]
    fn step_examples() {
        let env = NavEnvSpec::five_obstacles();
        assert_eq!(env.nav_step([1.0, 1.0], [0.0, 0.0]).unwrap(), [1.0, 1.0]);
        assert!(close(env.nav_step([1.0, 1.0], [2.0, -2.0]).unwrap(), [1.1, 0.9]));
        assert_eq!(env.nav_step([9.99, 5.0], [10.0, 0.0]).unwrap(), [10.0, 5.0]);
        assert!(env.nav_step([1.0, 1.0], [f64::NAN, 0.0]).is_err());
        assert!(env.nav_step([1.0, 1.0], [0.0, f64::INFINITY]).is_err());
    }

    #[test]
    fn reward_examples() {
        let env = NavEnvSpec::five_obstacles();
        assert_eq!(env.nav_reward([8.5, 1.5]), 0.0);
        assert_eq!(env.nav_reward([8.5, 2.5]), -1.0);
        assert_eq!(env.nav_reward([1.0, 1.0]), -56.5);
    }

    #[test]
    fn safety_examples() {
        let env = one_circle();
        assert!(env.is_safe_state([9.0, 9.0]));
        assert!(!env.is_safe_state([5.0, 5.0]));
        assert!(!env.is_safe_state([5.0, 7.0]));
        assert!(!env.is_safe_state([10.5, 1.0]));
    }

    #[test]
    fn distance_examples() {
        let env = one_circle();
        assert_eq!(env.min_obstacle_distance([5.0, 8.0]), 1.0);
        assert_eq!(env.min_obstacle_distance([5.0, 7.0]), 0.0);
        assert_eq!(env.min_obstacle_distance([5.0, 5.0]), -2.0);
    }

    #[test]
    fn rectangle_distance() {
        let r = Obstacle::Rect { min: [1.0, 1.0], max: [3.0, 2.0] };
        assert_eq!(r.signed_distance([2.0, 1.5]), -0.5);
        assert_eq!(r.signed_distance([3.0, 1.5]), 0.0);
        assert_eq!(r.signed_distance([5.0, 1.5]), 2.0);
        assert!((r.signed_distance([6.0, 6.0]) - 5.0).abs() < 1e-12);
    }

    #[test]
    fn default_layout_is_consistent() {
        let env = NavEnvSpec::five_obstacles();
        env.validate().unwrap();
        assert_eq!(env.obstacles.len(), 5);
        for p in NavEnvSpec::reference_starts() {
            assert!(env.is_safe_state(p), "{p:?}");
        }
        NavEnvSpec::single_obstacle().validate().unwrap();
    }

    #[test]
    fn invalid_obstacles_are_rejected() {
        let mut env = NavEnvSpec::obstacle_free();
        env.obstacles.push(Obstacle::Circle { center: [1.0, 1.0], radius: 0.0 });
        assert!(env.validate().is_err());
        env.obstacles = vec![Obstacle::Rect { min: [2.0, 1.0], max: [1.0, 3.0] }];
        assert!(env.validate().is_err());
    }

    #[test]
    fn uniform_starts_are_safe() {
        let env = NavEnvSpec::five_obstacles();
        let mut rng = RandomSource::new(3, 0);
        for _ in 0..2000 {
            let s = env.initial_state(&mut rng).unwrap();
            assert!(env.is_safe_state(s));
        }
    }

    #[test]
    fn hash_tracks_layout() {
        let a = NavEnvSpec::five_obstacles();
        let mut b = a.clone();
        assert_eq!(a.hash_hex(), b.hash_hex());
        b.goal = [8.5, 1.6];
        assert_ne!(a.hash_hex(), b.hash_hex());
    }

    proptest! {
        #[test]
        fn distance_sign_matches_safety(x in 0.0f64..=10.0, y in 0.0f64..=10.0) {
            let env = NavEnvSpec::five_obstacles();
            prop_assert_eq!(env.min_obstacle_distance([x, y]) > 0.0, env.is_safe_state([x, y]));
        }

        #[test]
        fn steps_stay_on_map(x in 0.0f64..=10.0, y in 0.0f64..=10.0, ax in -1e4f64..1e4, ay in -1e4f64..1e4) {
            let env = NavEnvSpec::five_obstacles();
            let s = env.nav_step([x, y], [ax, ay]).unwrap();
            prop_assert!(NavEnvSpec::in_map(s));
        }
    }
}
