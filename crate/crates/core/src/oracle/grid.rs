//! Exhaustive search over direct policy grids: dual functions, optimal values
//! of the probabilistic and mirror problems, bound certificates and
//! feasible-set inclusion checks.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dp::{policy_stats, PolicyStats};
use crate::env::{Environment, FiniteMdp, PolicyTable};
use crate::{Error, Result};

/// Membership tolerance for constraint thresholds.
pub const FEASIBILITY_TOL: f64 = 1e-12;

/// Every policy whose per-state action probabilities are multiples of `1/steps`.
#[derive(Clone, Debug, PartialEq)]
pub struct PolicyGrid {
    n_states: usize,
    n_actions: usize,
    steps: usize,
    rows: Vec<Vec<f64>>,
}

fn compositions(total: usize, parts: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    if parts == 1 {
        prefix.push(total);
        out.push(prefix.clone());
        prefix.pop();
        return;
    }
    for k in 0..=total {
        prefix.push(k);
        compositions(total - k, parts - 1, prefix, out);
        prefix.pop();
    }
}

impl PolicyGrid {
    pub fn new(n_states: usize, n_actions: usize, steps: usize) -> Result<Self> {
        if n_states == 0 || n_actions == 0 || steps == 0 {
            return Err(Error::InvalidInput("policy grid needs states, actions and at least one step".into()));
        }
        let mut counts = Vec::new();
        compositions(steps, n_actions, &mut Vec::new(), &mut counts);
        let rows = counts.into_iter().map(|c| c.into_iter().map(|k| k as f64 / steps as f64).collect()).collect();
        Ok(Self { n_states, n_actions, steps, rows })
    }

    pub fn for_mdp(mdp: &FiniteMdp, steps: usize) -> Result<Self> {
        Self::new(mdp.n_states(), mdp.n_actions(), steps)
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn resolution(&self) -> f64 {
        1.0 / self.steps as f64
    }

    /// Number of distinct per-state rows.
    pub fn rows_per_state(&self) -> usize {
        self.rows.len()
    }

    pub fn len(&self) -> usize {
        self.rows.len().pow(self.n_states as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Per-state row indices of policy `index` (state 0 is the fastest digit).
    fn digits(&self, mut index: usize) -> Vec<usize> {
        let base = self.rows.len();
        (0..self.n_states)
            .map(|_| {
                let d = index % base;
                index /= base;
                d
            })
            .collect()
    }

    pub fn table(&self, index: usize) -> PolicyTable {
        let mut probs = Vec::with_capacity(self.n_states * self.n_actions);
        for d in self.digits(index) {
            probs.extend_from_slice(&self.rows[d]);
        }
        PolicyTable { n_states: self.n_states, n_actions: self.n_actions, probs }
    }

    /// Row indices reachable by moving one unit of mass between two actions.
    fn row_neighbours(&self) -> Vec<Vec<usize>> {
        let unit = self.resolution();
        self.rows
            .iter()
            .map(|r| {
                self.rows
                    .iter()
                    .enumerate()
                    .filter(|(_, o)| {
                        let l1: f64 = r.iter().zip(o.iter()).map(|(a, b)| (a - b).abs()).sum();
                        (l1 - 2.0 * unit).abs() < 1e-9
                    })
                    .map(|(j, _)| j)
                    .collect()
            })
            .collect()
    }
}

/// Exact statistics of every grid policy, in index order.
pub fn grid_stats(mdp: &FiniteMdp, grid: &PolicyGrid) -> Vec<PolicyStats> {
    (0..grid.len()).into_par_iter().map(|i| policy_stats(mdp, &grid.table(i))).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Problem {
    /// `V_c ≥ 1 − δ/(T+1)`.
    Mirror,
    /// `P(all safe) ≥ 1 − δ`.
    Probabilistic,
}

impl Problem {
    pub fn slack(self, stats: &PolicyStats, delta: f64, horizon: usize) -> f64 {
        match self {
            Problem::Mirror => stats.v_c - (1.0 - delta / (horizon as f64 + 1.0)),
            Problem::Probabilistic => stats.p_safe - (1.0 - delta),
        }
    }
}

/// `{0}` plus `points` geometrically spaced values from `lo` to `hi`.
pub fn lambda_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    let mut out = vec![0.0];
    if points == 1 {
        out.push(lo);
    } else {
        let ratio = (hi / lo).ln() / (points - 1) as f64;
        out.extend((0..points).map(|k| lo * (ratio * k as f64).exp()));
    }
    out
}

pub fn default_lambda_grid() -> Vec<f64> {
    lambda_grid(1e-3, 1e3, 200)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DualGridResult {
    pub lambda_star: f64,
    pub value: f64,
    pub lambda_index: usize,
    /// The minimiser is the largest λ on the grid, so the true minimiser may lie beyond it.
    pub on_boundary: bool,
}

/// `min_λ max_i V_i + λ · slack_i` over precomputed grid statistics.
pub fn dual_grid_from_stats(stats: &[PolicyStats], problem: Problem, delta: f64, horizon: usize, lambdas: &[f64]) -> Result<DualGridResult> {
    if stats.is_empty() || lambdas.is_empty() {
        return Err(Error::InvalidInput("dual grid search needs nonempty policy and λ grids".into()));
    }
    let slack: Vec<f64> = stats.iter().map(|s| problem.slack(s, delta, horizon)).collect();
    let values: Vec<f64> = lambdas
        .par_iter()
        .map(|&lambda| stats.iter().zip(&slack).map(|(s, g)| s.value + lambda * g).fold(f64::NEG_INFINITY, f64::max))
        .collect();
    let (lambda_index, value) = values
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::INFINITY), |best, (i, v)| if v < best.1 { (i, v) } else { best });
    Ok(DualGridResult { lambda_star: lambdas[lambda_index], value, lambda_index, on_boundary: lambdas.len() > 1 && lambda_index == lambdas.len() - 1 })
}

fn dual_value(stats: &[PolicyStats], slack: &[f64], lambda: f64) -> f64 {
    stats.iter().zip(slack).map(|(s, g)| s.value + lambda * g).fold(f64::NEG_INFINITY, f64::max)
}

/// Maximum number of grid extensions plus bracket refinements in [`refine_dual`].
pub const MAX_LAMBDA_REFINEMENTS: usize = 60;

/// Refines a grid minimiser of the (convex) dual function. While the minimiser
/// sits on the largest λ the grid is extended by doubling; afterwards the
/// bracket between the minimiser's neighbours is split into 8 and searched
/// again, until the bracket or the value stops shrinking. Returns the refined
/// result and the number of rounds used. `lambdas` must be sorted.
pub fn refine_dual(stats: &[PolicyStats], problem: Problem, delta: f64, horizon: usize, lambdas: &[f64], coarse: DualGridResult) -> (DualGridResult, usize) {
    let slack: Vec<f64> = stats.iter().map(|s| problem.slack(s, delta, horizon)).collect();
    let mut best = (coarse.lambda_star, coarse.value);
    let mut rounds = 0;
    let mut lo = if coarse.lambda_index > 0 { lambdas[coarse.lambda_index - 1] } else { lambdas[0] };
    let mut hi = best.0;
    let mut on_boundary = coarse.on_boundary;
    if on_boundary {
        while rounds < MAX_LAMBDA_REFINEMENTS / 2 {
            rounds += 1;
            let next = 2.0 * hi.max(1e-3);
            let v = dual_value(stats, &slack, next);
            if v >= best.1 {
                hi = next;
                on_boundary = false;
                break;
            }
            lo = hi;
            hi = next;
            best = (next, v);
        }
    } else if coarse.lambda_index + 1 < lambdas.len() {
        hi = lambdas[coarse.lambda_index + 1];
    }
    while rounds < MAX_LAMBDA_REFINEMENTS && hi - lo > 1e-9 * (1.0 + hi) {
        rounds += 1;
        let points: Vec<f64> = (0..=8).map(|k| lo + (hi - lo) * k as f64 / 8.0).collect();
        let values: Vec<f64> = points.par_iter().map(|&l| dual_value(stats, &slack, l)).collect();
        let (k, v) = values.iter().copied().enumerate().fold((0, f64::INFINITY), |b, (i, v)| if v < b.1 { (i, v) } else { b });
        if v < best.1 {
            best = (points[k], v);
        }
        lo = points[k.saturating_sub(1)];
        hi = points[(k + 1).min(8)];
    }
    (DualGridResult { lambda_star: best.0, value: best.1, lambda_index: coarse.lambda_index, on_boundary }, rounds)
}

pub fn dual_grid(mdp: &FiniteMdp, problem: Problem, delta: f64, lambdas: &[f64], grid: &PolicyGrid) -> Result<DualGridResult> {
    dual_grid_from_stats(&grid_stats(mdp, grid), problem, delta, mdp.horizon(), lambdas)
}

/// Largest value over grid policies meeting the constraint, with its index.
pub fn constrained_max(stats: &[PolicyStats], problem: Problem, delta: f64, horizon: usize) -> Option<(usize, f64)> {
    stats
        .iter()
        .enumerate()
        .filter(|(_, s)| problem.slack(s, delta, horizon) >= -FEASIBILITY_TOL)
        .fold(None, |best: Option<(usize, f64)>, (i, s)| match best {
            Some((_, v)) if v >= s.value => best,
            _ => Some((i, s.value)),
        })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundCertificate {
    pub delta: f64,
    pub horizon: usize,
    /// Max value subject to `P(all safe) ≥ 1 − δ`.
    pub p_star: f64,
    /// Max value subject to `V_c ≥ 1 − δ/(T+1)`.
    pub p_hat_star: f64,
    /// Minimiser of the mirror dual function.
    pub lambda_hat_star: f64,
    /// Minimum of the probabilistic dual function.
    pub d_star: f64,
    /// Minimum of the mirror dual function.
    pub d_hat_star: f64,
    pub lambda_prob_star: f64,
    pub unconstrained_max: f64,
    /// `λ̂★ · δ · T/(T+1)`.
    pub bound_gap: f64,
    pub eps_grid: f64,
    pub sandwich_theorem1: bool,
    pub sandwich_corollary1: bool,
    pub mirror_duality_gap: f64,
    pub lambda_on_boundary: bool,
    pub policy_grid_resolution: f64,
    pub policy_grid_size: usize,
    pub lambda_grid_points: usize,
    pub lambda_refinements: usize,
    pub lambda_grid_max: f64,
    pub feasibility_tol: f64,
}

impl BoundCertificate {
    /// Human-readable `key = value` report.
    pub fn to_report(&self) -> String {
        toml::to_string(self).expect("certificate fields serialise")
    }

    pub fn from_report(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidInput(format!("bad certificate report: {e}")))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CertifyOptions {
    pub grid_steps: usize,
    pub lambdas: Vec<f64>,
    /// Refine the λ minimisers with [`refine_dual`].
    pub refine_lambda: bool,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        Self { grid_steps: 100, lambdas: default_lambda_grid(), refine_lambda: true }
    }
}

/// Largest change of each statistic between grid neighbours (one unit of mass moved in one state).
fn neighbour_variation(grid: &PolicyGrid, stats: &[PolicyStats]) -> (f64, f64, f64) {
    let neighbours = grid.row_neighbours();
    let base = grid.rows_per_state();
    (0..stats.len())
        .into_par_iter()
        .map(|i| {
            let mut acc = (0.0f64, 0.0f64, 0.0f64);
            let mut place = 1usize;
            for d in grid.digits(i) {
                for &nd in &neighbours[d] {
                    let j = i - d * place + nd * place;
                    acc.0 = acc.0.max((stats[i].value - stats[j].value).abs());
                    acc.1 = acc.1.max((stats[i].p_safe - stats[j].p_safe).abs());
                    acc.2 = acc.2.max((stats[i].v_c - stats[j].v_c).abs());
                }
                place *= base;
            }
            acc
        })
        .reduce(|| (0.0, 0.0, 0.0), |a, b| (a.0.max(b.0), a.1.max(b.1), a.2.max(b.2)))
}

pub fn certify_bounds(mdp: &FiniteMdp, delta: f64) -> Result<BoundCertificate> {
    certify_bounds_with(mdp, delta, &CertifyOptions::default())
}

pub fn certify_bounds_with(mdp: &FiniteMdp, delta: f64, options: &CertifyOptions) -> Result<BoundCertificate> {
    if !(0.0..=1.0).contains(&delta) {
        return Err(Error::InvalidInput(format!("δ must lie in [0, 1], got {delta}")));
    }
    let grid = PolicyGrid::for_mdp(mdp, options.grid_steps)?;
    let stats = grid_stats(mdp, &grid);
    let horizon = mdp.horizon();
    let (_, p_star) = constrained_max(&stats, Problem::Probabilistic, delta, horizon)
        .ok_or_else(|| Error::Infeasible(format!("probabilistic (δ = {delta}, grid resolution {})", grid.resolution())))?;
    let (_, p_hat_star) = constrained_max(&stats, Problem::Mirror, delta, horizon)
        .ok_or_else(|| Error::Infeasible(format!("mirror (δ = {delta}, grid resolution {})", grid.resolution())))?;
    let mut lambdas = options.lambdas.clone();
    lambdas.sort_by(f64::total_cmp);
    let mut mirror = dual_grid_from_stats(&stats, Problem::Mirror, delta, horizon, &lambdas)?;
    let mut prob = dual_grid_from_stats(&stats, Problem::Probabilistic, delta, horizon, &lambdas)?;
    let mut lambda_refinements = 0;
    if options.refine_lambda {
        let (m, rm) = refine_dual(&stats, Problem::Mirror, delta, horizon, &lambdas, mirror);
        let (p, rp) = refine_dual(&stats, Problem::Probabilistic, delta, horizon, &lambdas, prob);
        mirror = m;
        prob = p;
        lambda_refinements = rm + rp;
    }
    let unconstrained_max = stats.iter().map(|s| s.value).fold(f64::NEG_INFINITY, f64::max);

    let steps = horizon as f64 + 1.0;
    let lambda_hat_star = mirror.lambda_star;
    let bound_gap = lambda_hat_star * delta * horizon as f64 / steps;
    let (dv, dp, dvc) = neighbour_variation(&grid, &stats);
    let eps_grid = dv + lambda_hat_star.max(prob.lambda_star) * dp.max(dvc);

    let sandwich_theorem1 = p_hat_star + bound_gap + eps_grid >= p_star && p_star + eps_grid >= p_hat_star;
    let sandwich_corollary1 = p_star + bound_gap + eps_grid >= prob.value && prob.value + eps_grid >= p_star;

    Ok(BoundCertificate {
        delta,
        horizon,
        p_star,
        p_hat_star,
        lambda_hat_star,
        d_star: prob.value,
        d_hat_star: mirror.value,
        lambda_prob_star: prob.lambda_star,
        unconstrained_max,
        bound_gap,
        eps_grid,
        sandwich_theorem1,
        sandwich_corollary1,
        mirror_duality_gap: mirror.value - p_hat_star,
        lambda_on_boundary: mirror.on_boundary || prob.on_boundary,
        policy_grid_resolution: grid.resolution(),
        policy_grid_size: grid.len(),
        lambda_grid_points: options.lambdas.len(),
        lambda_refinements,
        lambda_grid_max: options.lambdas.iter().copied().fold(0.0, f64::max),
        feasibility_tol: FEASIBILITY_TOL,
    })
}

/// Region counts with `F̂ = {V_c ≥ 1 − δ/(T+1)}`, `F = {P ≥ 1 − δ}`, `F̄ = {V_c ≥ 1 − δ}`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct InclusionReport {
    pub policies: usize,
    pub mirror_feasible: usize,
    pub prob_feasible: usize,
    pub relaxed_feasible: usize,
    /// Policies in `F̂` but not in `F`.
    pub mirror_not_prob: usize,
    /// Policies in `F` but not in `F̄`.
    pub prob_not_relaxed: usize,
    /// Policies with `P > V_c`.
    pub p_exceeds_v_c: usize,
}

impl InclusionReport {
    pub fn violations(&self) -> usize {
        self.mirror_not_prob + self.prob_not_relaxed + self.p_exceeds_v_c
    }
}

pub fn feasibility_inclusions_from_stats(stats: &[PolicyStats], delta: f64, horizon: usize) -> InclusionReport {
    let steps = horizon as f64 + 1.0;
    // Implications are checked with a looser conclusion tolerance: the
    // Markov-style step multiplies rounding in V_c by T + 1.
    let conclusion_tol = (steps + 1.0) * FEASIBILITY_TOL;
    let mut r = InclusionReport { policies: stats.len(), ..Default::default() };
    for s in stats {
        let in_mirror = s.v_c >= 1.0 - delta / steps - FEASIBILITY_TOL;
        let in_prob = s.p_safe >= 1.0 - delta - FEASIBILITY_TOL;
        let in_relaxed = s.v_c >= 1.0 - delta - FEASIBILITY_TOL;
        r.mirror_feasible += in_mirror as usize;
        r.prob_feasible += in_prob as usize;
        r.relaxed_feasible += in_relaxed as usize;
        if in_mirror && s.p_safe < 1.0 - delta - conclusion_tol {
            r.mirror_not_prob += 1;
        }
        if in_prob && s.v_c < 1.0 - delta - conclusion_tol {
            r.prob_not_relaxed += 1;
        }
        if s.p_safe > s.v_c + conclusion_tol {
            r.p_exceeds_v_c += 1;
        }
    }
    r
}

pub fn feasibility_inclusions(mdp: &FiniteMdp, grid: &PolicyGrid, delta: f64) -> InclusionReport {
    feasibility_inclusions_from_stats(&grid_stats(mdp, grid), delta, mdp.horizon())
}
