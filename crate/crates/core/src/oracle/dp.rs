//! Backward recursions over finite MDPs, with optional forward-mode derivatives
//! in the softmax logits. These never touch the score function, so they serve
//! as an independent route to the exact gradients.

use crate::env::{FiniteMdp, PolicyTable};
use crate::policy::TabularSoftmaxPolicy;

/// Exact value, probability of staying safe, and cumulative safety of one policy.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PolicyStats {
    pub value: f64,
    pub p_safe: f64,
    pub v_c: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Quantity {
    Value,
    SafeProbability,
    CumulativeSafety,
}

impl Quantity {
    /// `(terminal, running, multiplier)` per state for `W_t(s) = c(s) + m(s)·E[W_{t+1}]`.
    fn terms(self, mdp: &FiniteMdp, s: usize) -> (f64, f64, f64) {
        let safe = if mdp.is_safe_state(s) { 1.0 } else { 0.0 };
        let steps = (crate::env::Environment::horizon(mdp) + 1) as f64;
        match self {
            Quantity::Value => (mdp.state_reward(s), mdp.state_reward(s), 1.0),
            Quantity::SafeProbability => (safe, 0.0, safe),
            Quantity::CumulativeSafety => (safe / steps, safe / steps, 1.0),
        }
    }
}

pub fn evaluate(mdp: &FiniteMdp, table: &PolicyTable, quantity: Quantity) -> f64 {
    let ns = mdp.n_states();
    let na = mdp.n_actions();
    let horizon = crate::env::Environment::horizon(mdp);
    let mut w: Vec<f64> = (0..ns).map(|s| quantity.terms(mdp, s).0).collect();
    let mut next = vec![0.0; ns];
    for _ in 0..horizon {
        for s in 0..ns {
            let (_, c, m) = quantity.terms(mdp, s);
            let mut expect = 0.0;
            for a in 0..na {
                let q: f64 = mdp.transition_row(s, a).iter().zip(&w).map(|(p, v)| p * v).sum();
                expect += table.prob(s, a) * q;
            }
            next[s] = c + m * expect;
        }
        std::mem::swap(&mut w, &mut next);
    }
    mdp.initial().iter().zip(&w).map(|(mu, v)| mu * v).sum()
}

pub fn policy_stats(mdp: &FiniteMdp, table: &PolicyTable) -> PolicyStats {
    PolicyStats {
        value: evaluate(mdp, table, Quantity::Value),
        p_safe: evaluate(mdp, table, Quantity::SafeProbability),
        v_c: evaluate(mdp, table, Quantity::CumulativeSafety),
    }
}

/// Value and gradient in the softmax logits, by forward-mode differentiation of the recursion.
pub fn evaluate_with_grad(mdp: &FiniteMdp, policy: &TabularSoftmaxPolicy, quantity: Quantity) -> (f64, Vec<f64>) {
    let ns = mdp.n_states();
    let na = mdp.n_actions();
    let d = ns * na;
    let horizon = crate::env::Environment::horizon(mdp);
    let table = policy.table();

    let mut w: Vec<f64> = (0..ns).map(|s| quantity.terms(mdp, s).0).collect();
    let mut dw = vec![vec![0.0; d]; ns];
    let mut next = vec![0.0; ns];
    let mut dnext = vec![vec![0.0; d]; ns];

    for _ in 0..horizon {
        for s in 0..ns {
            let (_, c, m) = quantity.terms(mdp, s);
            let row = table.row(s);
            let mut expect = 0.0;
            let grad = &mut dnext[s];
            grad.iter_mut().for_each(|g| *g = 0.0);
            for a in 0..na {
                let trans = mdp.transition_row(s, a);
                let q: f64 = trans.iter().zip(&w).map(|(p, v)| p * v).sum();
                expect += row[a] * q;
                // ∂π(a|s)/∂θ[s][b] = π(a|s)(1[a=b] − π(b|s))
                for b in 0..na {
                    let dpi = row[a] * (if a == b { 1.0 } else { 0.0 } - row[b]);
                    grad[s * na + b] += m * dpi * q;
                }
                for (next_s, &p) in trans.iter().enumerate() {
                    if p == 0.0 {
                        continue;
                    }
                    let scale = m * row[a] * p;
                    for (g, dv) in grad.iter_mut().zip(&dw[next_s]) {
                        *g += scale * dv;
                    }
                }
            }
            next[s] = c + m * expect;
        }
        std::mem::swap(&mut w, &mut next);
        std::mem::swap(&mut dw, &mut dnext);
    }

    let value = mdp.initial().iter().zip(&w).map(|(mu, v)| mu * v).sum();
    let mut grad = vec![0.0; d];
    for (s, mu) in mdp.initial().iter().enumerate() {
        for (g, dv) in grad.iter_mut().zip(&dw[s]) {
            *g += mu * dv;
        }
    }
    (value, grad)
}

/// `q[t][s·|A| + a] = P(S_{t+1..=T} all safe | S_t = s, A_t = a)` for `t = 0..=T`, with `q[T] ≡ 1`.
pub fn backward_safety(mdp: &FiniteMdp, table: &PolicyTable) -> Vec<Vec<f64>> {
    let ns = mdp.n_states();
    let na = mdp.n_actions();
    let horizon = crate::env::Environment::horizon(mdp);
    let mut q = vec![vec![0.0; ns * na]; horizon + 1];
    q[horizon].iter_mut().for_each(|v| *v = 1.0);
    for t in (0..horizon).rev() {
        // Probability that, arriving at s' at t+1, it and the rest of the episode stay safe.
        let stay: Vec<f64> = (0..ns)
            .map(|sp| {
                if !mdp.is_safe_state(sp) {
                    return 0.0;
                }
                (0..na).map(|ap| table.prob(sp, ap) * q[t + 1][sp * na + ap]).sum()
            })
            .collect();
        for s in 0..ns {
            for a in 0..na {
                q[t][s * na + a] = mdp.transition_row(s, a).iter().zip(&stay).map(|(p, v)| p * v).sum();
            }
        }
    }
    q
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn always_safe_is_trivially_safe() {
        let m = FiniteMdp::always_safe();
        let t = PolicyTable::uniform(2, 2);
        let st = policy_stats(&m, &t);
        assert!((st.p_safe - 1.0).abs() < 1e-15);
        assert!((st.v_c - 1.0).abs() < 1e-15);
        let q = backward_safety(&m, &t);
        assert!(q.iter().flatten().all(|&v| (v - 1.0).abs() < 1e-15));
    }

    #[test]
    fn sure_violation_zeroes_q() {
        // Action 1 from state 0 goes to the unsafe state with certainty.
        let m = FiniteMdp::new(2, 2, 2, vec![1.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 1.0], vec![0.0, 0.0], vec![true, false], vec![1.0, 0.0]).unwrap();
        let t = PolicyTable::uniform(2, 2);
        let q = backward_safety(&m, &t);
        assert_eq!(q[0][1], 0.0);
        assert_eq!(q[1][1], 0.0);
        let deterministic = PolicyTable { n_states: 2, n_actions: 2, probs: vec![0.0, 1.0, 0.0, 1.0] };
        assert_eq!(evaluate(&m, &deterministic, Quantity::SafeProbability), 0.0);
    }
}
