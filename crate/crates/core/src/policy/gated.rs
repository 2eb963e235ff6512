use serde::{Deserialize, Serialize};

use super::{sigmoid, GaussianNoise, Policy};
use crate::env::{NavEnvSpec, Obstacle};
use crate::episode::Vec2;
use crate::rng::RandomSource;
use crate::{Error, Result};

/// Whether the gate parameters `(H1', H2')` are part of θ.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GateMode {
    Frozen { h1: f64, h2: f64 },
    Learned,
}

/// Gaussian policy with mean `α(s)·θ₁ᵀM(s) + (1 − α(s))·θ₂ᵀM(s)` where
/// `M(s) = [x − x_g, y − y_g, x − x_o, y − y_o]` and
/// `α(s) = sigmoid(H1'·(‖s − o‖ / r − H2'))`.
///
/// Layout: `θ₁` row-major 4×2 (entries 0..8), `θ₂` (8..16), then `H1', H2'`
/// when the gate is learned.
#[derive(Clone, Debug, PartialEq)]
pub struct GatedLinearPolicy {
    params: Vec<f64>,
    gate: GateMode,
    goal: Vec2,
    obstacle: Vec2,
    radius: f64,
    noise: GaussianNoise,
}

pub const DEFAULT_GATE: (f64, f64) = (5.0, 1.0);

impl GatedLinearPolicy {
    pub fn new(goal: Vec2, obstacle: Vec2, radius: f64, gate: GateMode, noise: GaussianNoise) -> Self {
        assert!(radius > 0.0);
        let mut params = vec![0.0; 16];
        if gate == GateMode::Learned {
            params.extend([DEFAULT_GATE.0, DEFAULT_GATE.1]);
        }
        Self { params, gate, goal, obstacle, radius, noise }
    }

    /// Embeds goal and the first circular obstacle of `env`.
    pub fn for_env(env: &NavEnvSpec, gate: GateMode, noise: GaussianNoise) -> Result<Self> {
        let (center, radius) = env
            .obstacles
            .iter()
            .find_map(|o| match o {
                Obstacle::Circle { center, radius } => Some((*center, *radius)),
                Obstacle::Rect { .. } => None,
            })
            .ok_or_else(|| Error::InvalidInput("gated-linear policy needs a circular obstacle".into()))?;
        Ok(Self::new(env.goal, center, radius, gate, noise))
    }

    pub fn with_params(mut self, params: Vec<f64>) -> Self {
        assert_eq!(params.len(), self.params.len());
        self.params = params;
        self
    }

    pub fn gate_mode(&self) -> GateMode {
        self.gate
    }

    pub fn goal(&self) -> Vec2 {
        self.goal
    }

    pub fn obstacle(&self) -> (Vec2, f64) {
        (self.obstacle, self.radius)
    }

    pub fn noise(&self) -> GaussianNoise {
        self.noise
    }

    pub fn set_deterministic(&mut self, on: bool) {
        self.noise.deterministic = on;
    }

    pub fn gate_params(&self) -> (f64, f64) {
        match self.gate {
            GateMode::Frozen { h1, h2 } => (h1, h2),
            GateMode::Learned => (self.params[16], self.params[17]),
        }
    }

    pub fn features(&self, s: Vec2) -> [f64; 4] {
        [s[0] - self.goal[0], s[1] - self.goal[1], s[0] - self.obstacle[0], s[1] - self.obstacle[1]]
    }

    fn scaled_obstacle_distance(&self, s: Vec2) -> f64 {
        (s[0] - self.obstacle[0]).hypot(s[1] - self.obstacle[1]) / self.radius
    }

    pub fn gate(&self, s: Vec2) -> f64 {
        let (h1, h2) = self.gate_params();
        sigmoid(h1 * (self.scaled_obstacle_distance(s) - h2))
    }

    /// `(θ₁ᵀM, θ₂ᵀM)`.
    fn branches(&self, m: &[f64; 4]) -> (Vec2, Vec2) {
        let mut b1 = [0.0, 0.0];
        let mut b2 = [0.0, 0.0];
        for i in 0..4 {
            for j in 0..2 {
                b1[j] += self.params[i * 2 + j] * m[i];
                b2[j] += self.params[8 + i * 2 + j] * m[i];
            }
        }
        (b1, b2)
    }

    pub fn policy_mean(&self, s: Vec2) -> Vec2 {
        let m = self.features(s);
        let alpha = self.gate(s);
        let (b1, b2) = self.branches(&m);
        [alpha * b1[0] + (1.0 - alpha) * b2[0], alpha * b1[1] + (1.0 - alpha) * b2[1]]
    }
}

impl Policy for GatedLinearPolicy {
    type State = Vec2;
    type Action = Vec2;

    fn params(&self) -> &[f64] {
        &self.params
    }

    fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn sample_action(&self, s: &Vec2, rng: &mut RandomSource) -> Vec2 {
        self.noise.sample(self.policy_mean(*s), rng)
    }

    fn log_prob(&self, s: &Vec2, a: &Vec2) -> f64 {
        self.noise.log_density(self.policy_mean(*s), *a)
    }

    fn log_prob_grad_into(&self, s: &Vec2, a: &Vec2, out: &mut [f64]) {
        let m = self.features(*s);
        let alpha = self.gate(*s);
        let (b1, b2) = self.branches(&m);
        let mean = [alpha * b1[0] + (1.0 - alpha) * b2[0], alpha * b1[1] + (1.0 - alpha) * b2[1]];
        let w = self.noise.mean_score(mean, *a);
        for i in 0..4 {
            for j in 0..2 {
                out[i * 2 + j] = alpha * m[i] * w[j];
                out[8 + i * 2 + j] = (1.0 - alpha) * m[i] * w[j];
            }
        }
        if self.gate == GateMode::Learned {
            let (h1, h2) = self.gate_params();
            let rho = self.scaled_obstacle_distance(*s);
            let dalpha = alpha * (1.0 - alpha);
            let diff_dot_w = (b1[0] - b2[0]) * w[0] + (b1[1] - b2[1]) * w[1];
            out[16] = dalpha * (rho - h2) * diff_dot_w;
            out[17] = -dalpha * h1 * diff_dot_w;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::testing::fd_log_prob_error;

    fn policy(gate: GateMode) -> GatedLinearPolicy {
        GatedLinearPolicy::for_env(&NavEnvSpec::single_obstacle(), gate, GaussianNoise::new([0.5, 0.5])).unwrap()
    }

    #[test]
    fn zero_params_give_zero_mean() {
        let p = policy(GateMode::Frozen { h1: 5.0, h2: 1.0 });
        assert_eq!(p.num_params(), 16);
        assert_eq!(p.policy_mean([2.0, 3.0]), [0.0, 0.0]);
        assert_eq!(policy(GateMode::Learned).num_params(), 18);
    }

    #[test]
    fn saturated_gate_selects_first_branch() {
        let params: Vec<f64> = (0..16).map(|i| i as f64 * 0.25 - 2.0).collect();
        let p = policy(GateMode::Frozen { h1: 1000.0, h2: 1.0 }).with_params(params.clone());
        let s = [9.0, 9.0];
        assert_eq!(p.gate(s), 1.0);
        let m = p.features(s);
        let mut expected = [0.0, 0.0];
        for i in 0..4 {
            for j in 0..2 {
                expected[j] += params[i * 2 + j] * m[i];
            }
        }
        assert_eq!(p.policy_mean(s), expected);
    }

    #[test]
    fn mean_at_goal_by_hand() {
        // At the goal M = [0, 0, 3.5, -3.5]; only obstacle-relative rows contribute.
        let params: Vec<f64> = (0..16).map(|i| (i + 1) as f64).collect();
        let p = policy(GateMode::Frozen { h1: 5.0, h2: 1.0 }).with_params(params);
        let s = [8.5, 1.5];
        let rho = (3.5f64 * 3.5 * 2.0).sqrt() / 2.0;
        let alpha = 1.0 / (1.0 + (-5.0 * (rho - 1.0)).exp());
        // θ₁ rows 2,3 = [5,6],[7,8]; θ₂ rows 2,3 = [13,14],[15,16].
        let b1 = [5.0 * 3.5 - 7.0 * 3.5, 6.0 * 3.5 - 8.0 * 3.5];
        let b2 = [13.0 * 3.5 - 15.0 * 3.5, 14.0 * 3.5 - 16.0 * 3.5];
        let expected = [alpha * b1[0] + (1.0 - alpha) * b2[0], alpha * b1[1] + (1.0 - alpha) * b2[1]];
        let got = p.policy_mean(s);
        assert!((got[0] - expected[0]).abs() < 1e-12 && (got[1] - expected[1]).abs() < 1e-12);
    }

    #[test]
    fn score_matches_finite_differences() {
        let mut rng = RandomSource::new(21, 0);
        for gate in [GateMode::Learned, GateMode::Frozen { h1: 3.0, h2: 1.2 }] {
            for _ in 0..20 {
                let mut p = policy(gate);
                for v in p.params_mut().iter_mut() {
                    *v = rng.uniform_in(-1.0, 1.0);
                }
                if gate == GateMode::Learned {
                    p.params_mut()[16] = rng.uniform_in(0.5, 6.0);
                    p.params_mut()[17] = rng.uniform_in(0.5, 1.5);
                }
                let s = [rng.uniform_in(0.0, 10.0), rng.uniform_in(0.0, 10.0)];
                let a = [rng.uniform_in(-5.0, 5.0), rng.uniform_in(-5.0, 5.0)];
                assert!(fd_log_prob_error(&p, &s, &a, 1e-5) <= 1e-5);
            }
        }
    }

    #[test]
    fn requires_a_circle() {
        let env = NavEnvSpec { obstacles: vec![Obstacle::Rect { min: [1.0, 1.0], max: [2.0, 2.0] }], ..NavEnvSpec::single_obstacle() };
        assert!(GatedLinearPolicy::for_env(&env, GateMode::Learned, GaussianNoise::new([0.5, 0.5])).is_err());
    }
}
