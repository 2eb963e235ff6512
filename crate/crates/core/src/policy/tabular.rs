use super::Policy;
use crate::env::PolicyTable;
use crate::rng::RandomSource;

/// Softmax over a `(state, action)` table of logits.
#[derive(Clone, Debug, PartialEq)]
pub struct TabularSoftmaxPolicy {
    n_states: usize,
    n_actions: usize,
    theta: Vec<f64>,
}

impl TabularSoftmaxPolicy {
    pub fn zeros(n_states: usize, n_actions: usize) -> Self {
        Self { n_states, n_actions, theta: vec![0.0; n_states * n_actions] }
    }

    pub fn from_logits(n_states: usize, n_actions: usize, theta: Vec<f64>) -> Self {
        assert_eq!(theta.len(), n_states * n_actions);
        Self { n_states, n_actions, theta }
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn logit(&self, s: usize, a: usize) -> f64 {
        self.theta[s * self.n_actions + a]
    }

    pub fn action_probs(&self, s: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.n_actions];
        self.probs_into(s, &mut out);
        out
    }

    fn probs_into(&self, s: usize, out: &mut [f64]) {
        let row = &self.theta[s * self.n_actions..(s + 1) * self.n_actions];
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut z = 0.0;
        for (o, &x) in out.iter_mut().zip(row) {
            *o = (x - max).exp();
            z += *o;
        }
        for o in out.iter_mut() {
            *o /= z;
        }
    }

    pub fn table(&self) -> PolicyTable {
        let mut probs = vec![0.0; self.n_states * self.n_actions];
        for s in 0..self.n_states {
            self.probs_into(s, &mut probs[s * self.n_actions..(s + 1) * self.n_actions]);
        }
        PolicyTable { n_states: self.n_states, n_actions: self.n_actions, probs }
    }
}

impl Policy for TabularSoftmaxPolicy {
    type State = usize;
    type Action = usize;

    fn params(&self) -> &[f64] {
        &self.theta
    }

    fn params_mut(&mut self) -> &mut [f64] {
        &mut self.theta
    }

    fn sample_action(&self, s: &usize, rng: &mut RandomSource) -> usize {
        rng.categorical(&self.action_probs(*s))
    }

    fn log_prob(&self, s: &usize, a: &usize) -> f64 {
        let row = &self.theta[s * self.n_actions..(s + 1) * self.n_actions];
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + row.iter().map(|x| (x - max).exp()).sum::<f64>().ln();
        row[*a] - lse
    }

    fn log_prob_grad_into(&self, s: &usize, a: &usize, out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        let base = s * self.n_actions;
        self.probs_into(*s, &mut out[base..base + self.n_actions]);
        for v in &mut out[base..base + self.n_actions] {
            *v = -*v;
        }
        out[base + a] += 1.0;
    }
}
