use super::{GaussianNoise, Policy};
use crate::episode::Vec2;
use crate::rng::RandomSource;

/// Gaussian policy whose mean is a linear combination of radial basis functions.
///
/// Parameters are laid out as `[θ_x (d entries), θ_y (d entries)]`.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianRbfPolicy {
    theta: Vec<f64>,
    centers: Vec<Vec2>,
    bandwidth: f64,
    noise: GaussianNoise,
}

impl GaussianRbfPolicy {
    pub fn new(centers: Vec<Vec2>, bandwidth: f64, noise: GaussianNoise) -> Self {
        assert!(bandwidth > 0.0, "RBF bandwidth must be positive");
        let theta = vec![0.0; 2 * centers.len()];
        Self { theta, centers, bandwidth, noise }
    }

    /// 21 × 21 lattice over `[0, 10]²` (separation 0.5), σ = 0.5, Σ = diag(0.5, 0.5), θ = 0.
    pub fn paper_default() -> Self {
        Self::new(Self::lattice(0.0, 10.0, 0.5), 0.5, GaussianNoise::new([0.5, 0.5]))
    }

    /// Square lattice of centers from `lo` to `hi` inclusive.
    pub fn lattice(lo: f64, hi: f64, separation: f64) -> Vec<Vec2> {
        let n = ((hi - lo) / separation).round() as usize + 1;
        let mut out = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                out.push([lo + i as f64 * separation, lo + j as f64 * separation]);
            }
        }
        out
    }

    pub fn with_params(mut self, theta: Vec<f64>) -> Self {
        assert_eq!(theta.len(), self.theta.len());
        self.theta = theta;
        self
    }

    pub fn centers(&self) -> &[Vec2] {
        &self.centers
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn noise(&self) -> GaussianNoise {
        self.noise
    }

    pub fn set_deterministic(&mut self, on: bool) {
        self.noise.deterministic = on;
    }

    pub fn rbf_features(&self, s: Vec2) -> Vec<f64> {
        let mut out = vec![0.0; self.centers.len()];
        self.features_into(s, &mut out);
        out
    }

    fn features_into(&self, s: Vec2, out: &mut [f64]) {
        let inv = 1.0 / (2.0 * self.bandwidth * self.bandwidth);
        for (f, c) in out.iter_mut().zip(&self.centers) {
            let dx = s[0] - c[0];
            let dy = s[1] - c[1];
            *f = (-(dx * dx + dy * dy) * inv).exp();
        }
    }

    pub fn policy_mean(&self, s: Vec2) -> Vec2 {
        let d = self.centers.len();
        let inv = 1.0 / (2.0 * self.bandwidth * self.bandwidth);
        let (tx, ty) = self.theta.split_at(d);
        let mut mean = [0.0, 0.0];
        for (k, c) in self.centers.iter().enumerate() {
            let dx = s[0] - c[0];
            let dy = s[1] - c[1];
            let f = (-(dx * dx + dy * dy) * inv).exp();
            mean[0] += tx[k] * f;
            mean[1] += ty[k] * f;
        }
        mean
    }
}

impl Policy for GaussianRbfPolicy {
    type State = Vec2;
    type Action = Vec2;

    fn params(&self) -> &[f64] {
        &self.theta
    }

    fn params_mut(&mut self) -> &mut [f64] {
        &mut self.theta
    }

    fn sample_action(&self, s: &Vec2, rng: &mut RandomSource) -> Vec2 {
        self.noise.sample(self.policy_mean(*s), rng)
    }

    fn log_prob(&self, s: &Vec2, a: &Vec2) -> f64 {
        self.noise.log_density(self.policy_mean(*s), *a)
    }

    fn log_prob_grad_into(&self, s: &Vec2, a: &Vec2, out: &mut [f64]) {
        let d = self.centers.len();
        let (gx, gy) = out.split_at_mut(d);
        self.features_into(*s, gx);
        let (tx, ty) = self.theta.split_at(d);
        let mut mean = [0.0, 0.0];
        for k in 0..d {
            mean[0] += tx[k] * gx[k];
            mean[1] += ty[k] * gx[k];
        }
        let w = self.noise.mean_score(mean, *a);
        for k in 0..d {
            let f = gx[k];
            gx[k] = w[0] * f;
            gy[k] = w[1] * f;
        }
    }
}
