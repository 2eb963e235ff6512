use thiserror::Error;

use crate::trainers::DiagnosticDump;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid MDP: {0}")]
    InvalidMdp(String),

    #[error("enumeration needs up to {required} trajectories, cap is {cap}")]
    EnumerationCap { required: u128, cap: u128 },

    #[error("no grid policy satisfies the {0} constraint")]
    Infeasible(String),

    #[error("non-finite gradient at episode {}", .0.episode)]
    NonFiniteGradient(Box<DiagnosticDump>),

    #[error("config: {0}")]
    Config(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
