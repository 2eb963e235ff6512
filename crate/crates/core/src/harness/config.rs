//! Experiment configuration files (TOML).
//!
//! ```toml
//! [env]
//! builtin = "five-obstacles"      # or: layout = "path/to/layout.toml", finite = "risky-two-state"
//! start = { kind = "fixed", points = [[1.0, 1.0], [1.0, 9.0]] }   # optional
//!
//! [policy]
//! kind = "rbf"                    # rbf | gated-linear | tabular
//!
//! [trainer]
//! method = "prob-spg-reinforce"
//! eta_theta = 0.02
//! eta_lambda = 0.002
//! delta = 0.05
//! episodes = 20000
//! clip_norm = 1000.0
//!
//! [evaluation]
//! episodes = 500
//! seeds = [0, 1, 2, 3, 4]
//!
//! [output]
//! directory = "runs/nav-quick"
//! checkpoint_every = 0
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::env::{FiniteMdp, NavEnvSpec, StartDistribution};
use crate::estimators::{CriticInput, SafetyCritic};
use crate::oracle::builtin_instance;
use crate::policy::{GateMode, GatedLinearPolicy, GaussianNoise, GaussianRbfPolicy, TabularSoftmaxPolicy, DEFAULT_GATE};
use crate::trainers::{Method, TrainerConfig};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub env: EnvConfig,
    pub policy: PolicyConfig,
    pub trainer: TrainerConfig,
    #[serde(default)]
    pub critic: CriticConfig,
    #[serde(default)]
    pub evaluation: EvaluationConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
}

/// Exactly one of `builtin`, `layout` or `finite` selects the environment.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvConfig {
    /// `five-obstacles`, `single-obstacle` or `obstacle-free`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub builtin: Option<String>,
    /// Navigation layout file (a serialised [`NavEnvSpec`]).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub layout: Option<PathBuf>,
    /// Builtin finite MDP name, or a path to a finite-MDP TOML file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub finite: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<StartDistribution>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ExperimentEnv {
    Nav(NavEnvSpec),
    Finite(FiniteMdp),
}

impl ExperimentEnv {
    pub fn hash_hex(&self) -> String {
        match self {
            ExperimentEnv::Nav(spec) => spec.hash_hex(),
            ExperimentEnv::Finite(mdp) => mdp.hash_hex(),
        }
    }
}

pub fn builtin_layout(name: &str) -> Option<NavEnvSpec> {
    match name {
        "five-obstacles" => Some(NavEnvSpec::five_obstacles()),
        "single-obstacle" => Some(NavEnvSpec::single_obstacle()),
        "obstacle-free" => Some(NavEnvSpec::obstacle_free()),
        _ => None,
    }
}

fn resolve_path(base: Option<&Path>, p: &Path) -> PathBuf {
    match base {
        Some(dir) if p.is_relative() => dir.join(p),
        _ => p.to_path_buf(),
    }
}

impl EnvConfig {
    /// Builds the environment; relative paths resolve against `base`.
    pub fn resolve(&self, base: Option<&Path>) -> Result<ExperimentEnv> {
        let chosen = [self.builtin.is_some(), self.layout.is_some(), self.finite.is_some()].iter().filter(|&&b| b).count();
        if chosen != 1 {
            return Err(Error::Config("[env] needs exactly one of `builtin`, `layout`, `finite`".into()));
        }
        if let Some(name) = &self.finite {
            if self.start.is_some() {
                return Err(Error::Config("[env] `start` applies to navigation layouts only".into()));
            }
            let mdp = match builtin_instance(name) {
                Some(m) => m,
                None => {
                    let path = resolve_path(base, Path::new(name));
                    let text = std::fs::read_to_string(&path)
                        .map_err(|e| Error::Config(format!("unknown finite MDP `{name}` ({}: {e})", path.display())))?;
                    toml::from_str::<FiniteMdp>(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
                }
            };
            let mdp = match self.horizon {
                Some(h) => mdp.with_horizon(h)?,
                None => mdp,
            };
            return Ok(ExperimentEnv::Finite(mdp));
        }
        let mut spec = if let Some(name) = &self.builtin {
            builtin_layout(name).ok_or_else(|| Error::Config(format!("unknown builtin layout `{name}`")))?
        } else {
            let path = resolve_path(base, self.layout.as_deref().expect("checked above"));
            let text = std::fs::read_to_string(&path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            toml::from_str::<NavEnvSpec>(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        };
        if let Some(start) = &self.start {
            spec.start = start.clone();
        }
        if let Some(h) = self.horizon {
            spec.horizon = h;
        }
        spec.validate()?;
        Ok(ExperimentEnv::Nav(spec))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PolicyConfig {
    Rbf {
        #[serde(default = "default_separation")]
        separation: f64,
        #[serde(default = "default_bandwidth")]
        bandwidth: f64,
        #[serde(default = "default_variance")]
        variance: [f64; 2],
    },
    GatedLinear {
        #[serde(default = "default_gate")]
        gate: GateMode,
        #[serde(default = "default_variance")]
        variance: [f64; 2],
    },
    Tabular,
}

fn default_separation() -> f64 {
    0.5
}

fn default_bandwidth() -> f64 {
    0.5
}

fn default_variance() -> [f64; 2] {
    [0.5, 0.5]
}

fn default_gate() -> GateMode {
    GateMode::Frozen { h1: DEFAULT_GATE.0, h2: DEFAULT_GATE.1 }
}

impl PolicyConfig {
    pub fn tag(&self) -> &'static str {
        match self {
            PolicyConfig::Rbf { .. } => "rbf",
            PolicyConfig::GatedLinear { .. } => "gated-linear",
            PolicyConfig::Tabular => "tabular",
        }
    }

    fn noise(variance: [f64; 2]) -> Result<GaussianNoise> {
        if !(variance[0] > 0.0 && variance[1] > 0.0) {
            return Err(Error::Config(format!("policy variance must be positive, got {variance:?}")));
        }
        Ok(GaussianNoise::new(variance))
    }

    pub fn build_rbf(&self) -> Result<GaussianRbfPolicy> {
        match *self {
            PolicyConfig::Rbf { separation, bandwidth, variance } => {
                if !(separation > 0.0 && bandwidth > 0.0) {
                    return Err(Error::Config("RBF separation and bandwidth must be positive".into()));
                }
                let centers = GaussianRbfPolicy::lattice(crate::env::MAP_MIN, crate::env::MAP_MAX, separation);
                Ok(GaussianRbfPolicy::new(centers, bandwidth, Self::noise(variance)?))
            }
            _ => Err(Error::Config("not an RBF policy".into())),
        }
    }

    pub fn build_gated(&self, env: &NavEnvSpec) -> Result<GatedLinearPolicy> {
        match *self {
            PolicyConfig::GatedLinear { gate, variance } => GatedLinearPolicy::for_env(env, gate, Self::noise(variance)?),
            _ => Err(Error::Config("not a gated-linear policy".into())),
        }
    }

    pub fn build_tabular(&self, mdp: &FiniteMdp) -> Result<TabularSoftmaxPolicy> {
        match self {
            PolicyConfig::Tabular => Ok(TabularSoftmaxPolicy::zeros(mdp.n_states(), mdp.n_actions())),
            _ => Err(Error::Config("not a tabular policy".into())),
        }
    }
}

/// Sigmoid safety critic settings (navigation only; finite MDPs use the exact table).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CriticConfig {
    pub h1: f64,
    pub h2: f64,
    pub step_size: f64,
    pub input: CriticInput,
}

impl Default for CriticConfig {
    fn default() -> Self {
        let c = SafetyCritic::default();
        Self { h1: c.h1, h2: c.h2, step_size: c.step_size, input: c.input }
    }
}

impl CriticConfig {
    pub fn build(&self) -> SafetyCritic {
        SafetyCritic { h1: self.h1, h2: self.h2, step_size: self.step_size, input: self.input }
    }
}

/// Start states used when evaluating a trained policy.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EvalStart {
    /// Uniform over the safe set, whatever the training starts were.
    #[default]
    UniformSafe,
    /// The environment's own initial distribution.
    Env,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluationConfig {
    #[serde(default = "default_eval_episodes")]
    pub episodes: usize,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub start: EvalStart,
}

fn default_eval_episodes() -> usize {
    500
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        Self { episodes: default_eval_episodes(), seeds: default_seeds(), start: EvalStart::UniformSafe }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// Relative to the output root, which is `.` unless `SPG_OUT_DIR` is set.
    #[serde(default = "default_directory")]
    pub directory: PathBuf,
    /// Write an intermediate checkpoint every this many episodes (0: final only).
    #[serde(default)]
    pub checkpoint_every: u64,
}

fn default_directory() -> PathBuf {
    PathBuf::from("runs/default")
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { directory: default_directory(), checkpoint_every: 0 }
    }
}

/// Weight grids for `spg sweep`; every run trains with a fixed penalty.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    /// λ values for the probabilistic formulation.
    #[serde(default)]
    pub prob_weights: Vec<f64>,
    /// Method used for the probabilistic points.
    #[serde(default = "default_prob_method")]
    pub prob_method: Method,
    /// μ values for the reward-shaped cumulative formulation.
    #[serde(default)]
    pub cumulative_weights: Vec<f64>,
    #[serde(default = "default_runs")]
    pub runs: usize,
}

fn default_prob_method() -> Method {
    Method::ProbSpgReinforce
}

fn default_runs() -> usize {
    5
}

const BUILTINS: &[(&str, &str)] = &[
    ("nav-paper", include_str!("../../configs/nav-paper.toml")),
    ("nav-quick", include_str!("../../configs/nav-quick.toml")),
    ("nav-quick-ac", include_str!("../../configs/nav-quick-ac.toml")),
    ("nav-single-obstacle", include_str!("../../configs/nav-single-obstacle.toml")),
    ("nav-sweep", include_str!("../../configs/nav-sweep.toml")),
    ("oracle-small", include_str!("../../configs/oracle-small.toml")),
];

pub fn builtin_config_names() -> Vec<&'static str> {
    BUILTINS.iter().map(|(n, _)| *n).collect()
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn builtin(name: &str) -> Option<Self> {
        BUILTINS.iter().find(|(n, _)| *n == name).map(|(_, text)| Self::parse(text).expect("builtin configs are valid"))
    }

    /// A builtin name or a path to a TOML file.
    pub fn load(name_or_path: &str) -> Result<(Self, Option<PathBuf>)> {
        if let Some(c) = Self::builtin(name_or_path) {
            return Ok((c, None));
        }
        let path = Path::new(name_or_path);
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::Config(format!("`{name_or_path}` is neither a builtin ({}) nor a readable file: {e}", builtin_config_names().join(", ")))
        })?;
        let config = Self::parse(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Ok((config, path.parent().map(Path::to_path_buf)))
    }

    pub fn validate(&self) -> Result<()> {
        self.trainer.validate()?;
        if self.evaluation.episodes == 0 {
            return Err(Error::Config("evaluation.episodes must be positive".into()));
        }
        if self.evaluation.seeds.is_empty() {
            return Err(Error::Config("evaluation.seeds must not be empty".into()));
        }
        if let Some(s) = &self.sweep {
            if s.prob_weights.is_empty() && s.cumulative_weights.is_empty() {
                return Err(Error::Config("sweep grid is empty".into()));
            }
            if s.runs == 0 {
                return Err(Error::Config("sweep.runs must be positive".into()));
            }
            if s.prob_method == Method::CumulativeShaped {
                return Err(Error::Config("sweep.prob_method must be a probabilistic method".into()));
            }
            if s.prob_weights.iter().chain(&s.cumulative_weights).any(|w| !(*w >= 0.0 && w.is_finite())) {
                return Err(Error::Config("sweep weights must be finite and >= 0".into()));
            }
        }
        if !(self.critic.step_size >= 0.0) {
            return Err(Error::Config("critic.step_size must be >= 0".into()));
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }
}
