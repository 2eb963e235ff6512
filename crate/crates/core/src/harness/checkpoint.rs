//! Self-contained checkpoints: environment, policy shape, parameters and λ.
//!
//! The file is JSON. Parameters and λ are stored as the hexadecimal bit
//! patterns of their `f64` values so a reload is bit-exact.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::{ExperimentEnv, PolicyConfig};
use crate::env::{FiniteMdp, NavEnvSpec};
use crate::policy::{GatedLinearPolicy, GaussianRbfPolicy, Policy, TabularSoftmaxPolicy};
use crate::trainers::TrainerConfig;
use crate::{Error, Result};

pub const CHECKPOINT_FORMAT: &str = "spg-checkpoint/1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum EnvSnapshot {
    Nav(NavEnvSpec),
    Finite(FiniteMdp),
}

impl From<&ExperimentEnv> for EnvSnapshot {
    fn from(e: &ExperimentEnv) -> Self {
        match e {
            ExperimentEnv::Nav(s) => EnvSnapshot::Nav(s.clone()),
            ExperimentEnv::Finite(m) => EnvSnapshot::Finite(m.clone()),
        }
    }
}

impl From<EnvSnapshot> for ExperimentEnv {
    fn from(e: EnvSnapshot) -> Self {
        match e {
            EnvSnapshot::Nav(s) => ExperimentEnv::Nav(s),
            EnvSnapshot::Finite(m) => ExperimentEnv::Finite(m),
        }
    }
}

/// A concrete policy of any supported parametrisation.
#[derive(Clone, Debug, PartialEq)]
pub enum TrainedPolicy {
    Rbf(GaussianRbfPolicy),
    Gated(GatedLinearPolicy),
    Tabular(TabularSoftmaxPolicy),
}

impl TrainedPolicy {
    /// Zero-initialised policy described by `config` for `env`.
    pub fn build(config: &PolicyConfig, env: &ExperimentEnv) -> Result<Self> {
        match (config, env) {
            (PolicyConfig::Rbf { .. }, ExperimentEnv::Nav(_)) => Ok(TrainedPolicy::Rbf(config.build_rbf()?)),
            (PolicyConfig::GatedLinear { .. }, ExperimentEnv::Nav(spec)) => Ok(TrainedPolicy::Gated(config.build_gated(spec)?)),
            (PolicyConfig::Tabular, ExperimentEnv::Finite(mdp)) => Ok(TrainedPolicy::Tabular(config.build_tabular(mdp)?)),
            (c, ExperimentEnv::Nav(_)) => Err(Error::Config(format!("policy `{}` does not fit a navigation environment", c.tag()))),
            (c, ExperimentEnv::Finite(_)) => Err(Error::Config(format!("policy `{}` does not fit a finite MDP; use `tabular`", c.tag()))),
        }
    }

    pub fn params(&self) -> &[f64] {
        match self {
            TrainedPolicy::Rbf(p) => p.params(),
            TrainedPolicy::Gated(p) => p.params(),
            TrainedPolicy::Tabular(p) => p.params(),
        }
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        match self {
            TrainedPolicy::Rbf(p) => p.params_mut(),
            TrainedPolicy::Gated(p) => p.params_mut(),
            TrainedPolicy::Tabular(p) => p.params_mut(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format: String,
    pub env_hash: String,
    pub env: EnvSnapshot,
    pub policy: PolicyConfig,
    pub trainer: TrainerConfig,
    /// Number of completed training episodes.
    pub episode: u64,
    pub lambda: String,
    pub params: Vec<String>,
}

pub fn f64_to_hex(v: f64) -> String {
    format!("{:016x}", v.to_bits())
}

pub fn f64_from_hex(s: &str) -> Result<f64> {
    u64::from_str_radix(s, 16)
        .map(f64::from_bits)
        .map_err(|e| Error::Checkpoint(format!("bad f64 bit pattern `{s}`: {e}")))
}

impl Checkpoint {
    pub fn new(env: &ExperimentEnv, policy_config: &PolicyConfig, trainer: &TrainerConfig, episode: u64, lambda: f64, params: &[f64]) -> Self {
        Self {
            format: CHECKPOINT_FORMAT.to_string(),
            env_hash: env.hash_hex(),
            env: env.into(),
            policy: policy_config.clone(),
            trainer: trainer.clone(),
            episode,
            lambda: f64_to_hex(lambda),
            params: params.iter().map(|&v| f64_to_hex(v)).collect(),
        }
    }

    pub fn lambda(&self) -> Result<f64> {
        f64_from_hex(&self.lambda)
    }

    pub fn param_values(&self) -> Result<Vec<f64>> {
        self.params.iter().map(|s| f64_from_hex(s)).collect()
    }

    pub fn to_text(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("checkpoint serialises");
        s.push('\n');
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let c: Checkpoint = serde_json::from_str(text).map_err(|e| Error::Checkpoint(e.to_string()))?;
        if c.format != CHECKPOINT_FORMAT {
            return Err(Error::Checkpoint(format!("unsupported format `{}`", c.format)));
        }
        Ok(c)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))?;
        Self::from_text(&text).map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))
    }

    /// Rebuilds the environment and policy, checking the environment digest and
    /// the parameter count.
    pub fn restore(&self) -> Result<(ExperimentEnv, TrainedPolicy)> {
        let env: ExperimentEnv = self.env.clone().into();
        if let ExperimentEnv::Nav(spec) = &env {
            spec.validate()?;
        }
        let hash = env.hash_hex();
        if hash != self.env_hash {
            return Err(Error::Checkpoint(format!("environment digest mismatch: stored {}, computed {hash}", self.env_hash)));
        }
        let mut policy = TrainedPolicy::build(&self.policy, &env)?;
        let values = self.param_values()?;
        if values.len() != policy.params().len() {
            return Err(Error::Checkpoint(format!("expected {} parameters, found {}", policy.params().len(), values.len())));
        }
        policy.params_mut().copy_from_slice(&values);
        Ok((env, policy))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::ExperimentConfig;
    use proptest::prelude::*;

    fn nav_checkpoint(params: Vec<f64>, lambda: f64) -> Checkpoint {
        let c = ExperimentConfig::builtin("nav-quick").unwrap();
        let env = c.env.resolve(None).unwrap();
        Checkpoint::new(&env, &c.policy, &c.trainer, 7, lambda, &params)
    }

    proptest! {
        #[test]
        fn hex_round_trip(bits in any::<u64>()) {
            let v = f64::from_bits(bits);
            prop_assert_eq!(f64_from_hex(&f64_to_hex(v)).unwrap().to_bits(), bits);
        }

        #[test]
        fn checkpoint_round_trip_is_bit_exact(seed in any::<u64>(), lambda in 0.0f64..1e6) {
            let n = 441 * 2;
            let mut rng = crate::rng::RandomSource::new(seed, 0);
            let params: Vec<f64> = (0..n).map(|_| rng.standard_normal() * 1e3).collect();
            let ck = nav_checkpoint(params.clone(), lambda);
            let back = Checkpoint::from_text(&ck.to_text()).unwrap();
            prop_assert_eq!(&back, &ck);
            let (_, policy) = back.restore().unwrap();
            prop_assert!(policy.params().iter().zip(&params).all(|(a, b)| a.to_bits() == b.to_bits()));
            prop_assert_eq!(back.lambda().unwrap().to_bits(), lambda.to_bits());
        }
    }

    #[test]
    fn tampered_environment_is_rejected() {
        let n = TrainedPolicy::build(&PolicyConfig::Rbf { separation: 0.5, bandwidth: 0.5, variance: [0.5, 0.5] }, &ExperimentEnv::Nav(NavEnvSpec::five_obstacles()))
            .unwrap()
            .params()
            .len();
        let mut ck = nav_checkpoint(vec![0.0; n], 0.0);
        if let EnvSnapshot::Nav(spec) = &mut ck.env {
            spec.goal = [8.0, 1.0];
        }
        assert!(matches!(ck.restore(), Err(Error::Checkpoint(_))));
    }

    #[test]
    fn wrong_parameter_count_is_rejected() {
        let ck = nav_checkpoint(vec![0.0; 3], 0.0);
        assert!(ck.restore().is_err());
    }

    #[test]
    fn corrupt_text_is_rejected() {
        assert!(Checkpoint::from_text("{ not json").is_err());
        let mut ck = nav_checkpoint(vec![0.0; 3], 0.0);
        ck.format = "other".into();
        assert!(Checkpoint::from_text(&ck.to_text()).is_err());
    }

    #[test]
    fn mismatched_policy_kind_is_rejected() {
        let env = ExperimentEnv::Finite(FiniteMdp::risky_goal());
        assert!(TrainedPolicy::build(&PolicyConfig::Rbf { separation: 0.5, bandwidth: 0.5, variance: [0.5, 0.5] }, &env).is_err());
        assert!(TrainedPolicy::build(&PolicyConfig::Tabular, &env).is_ok());
    }
}
