//! Policy parametrizations with sampling, log-density and closed-form score.

mod gated;
mod rbf;
mod tabular;

pub use gated::{GateMode, GatedLinearPolicy, DEFAULT_GATE};
pub use rbf::GaussianRbfPolicy;
pub use tabular::TabularSoftmaxPolicy;

use serde::{Deserialize, Serialize};

use crate::episode::Vec2;
use crate::rng::RandomSource;

/// A stochastic policy `π_θ(a | s)` over a flat parameter vector.
pub trait Policy {
    type State;
    type Action;

    fn params(&self) -> &[f64];

    fn params_mut(&mut self) -> &mut [f64];

    fn num_params(&self) -> usize {
        self.params().len()
    }

    fn sample_action(&self, s: &Self::State, rng: &mut RandomSource) -> Self::Action;

    fn log_prob(&self, s: &Self::State, a: &Self::Action) -> f64;

    /// Writes `∇_θ log π_θ(a | s)` into `out` (length `num_params`).
    fn log_prob_grad_into(&self, s: &Self::State, a: &Self::Action, out: &mut [f64]);

    fn log_prob_grad(&self, s: &Self::State, a: &Self::Action) -> Vec<f64> {
        let mut out = vec![0.0; self.num_params()];
        self.log_prob_grad_into(s, a, &mut out);
        out
    }
}

/// Diagonal-covariance Gaussian over planar actions.
///
/// `variance` holds the diagonal of Σ. In deterministic mode sampling returns
/// the mean exactly; the density and score still use `variance`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianNoise {
    pub variance: Vec2,
    pub deterministic: bool,
}

impl GaussianNoise {
    pub fn new(variance: Vec2) -> Self {
        assert!(variance.iter().all(|v| *v > 0.0), "covariance entries must be positive");
        Self { variance, deterministic: false }
    }

    pub fn sample(&self, mean: Vec2, rng: &mut RandomSource) -> Vec2 {
        if self.deterministic {
            return mean;
        }
        let z0 = rng.standard_normal();
        let z1 = rng.standard_normal();
        [mean[0] + self.variance[0].sqrt() * z0, mean[1] + self.variance[1].sqrt() * z1]
    }

    pub fn log_density(&self, mean: Vec2, a: Vec2) -> f64 {
        let r0 = a[0] - mean[0];
        let r1 = a[1] - mean[1];
        let det = self.variance[0] * self.variance[1];
        -0.5 * (r0 * r0 / self.variance[0] + r1 * r1 / self.variance[1]) - (2.0 * std::f64::consts::PI).ln() - 0.5 * det.ln()
    }

    /// `Σ⁻¹ (a − mean)`, the score with respect to the mean.
    pub fn mean_score(&self, mean: Vec2, a: Vec2) -> Vec2 {
        [(a[0] - mean[0]) / self.variance[0], (a[1] - mean[1]) / self.variance[1]]
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[cfg(test)]
pub(crate) mod testing {
    //! Central-difference probe shared by the policy tests.

    use super::Policy;

    /// `‖analytic − FD‖∞ / (1 + ‖FD‖∞)` for the log-density at `(s, a)`.
    pub fn fd_log_prob_error<P: Policy + Clone>(policy: &P, s: &P::State, a: &P::Action, h: f64) -> f64 {
        let analytic = policy.log_prob_grad(s, a);
        let mut fd = vec![0.0; analytic.len()];
        for i in 0..analytic.len() {
            let mut plus = policy.clone();
            plus.params_mut()[i] += h;
            let mut minus = policy.clone();
            minus.params_mut()[i] -= h;
            fd[i] = (plus.log_prob(s, a) - minus.log_prob(s, a)) / (2.0 * h);
        }
        let num = analytic.iter().zip(&fd).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        let den = 1.0 + fd.iter().map(|v| v.abs()).fold(0.0, f64::max);
        num / den
    }
}
