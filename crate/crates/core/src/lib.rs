//! Probabilistically constrained policy gradients.
//!
//! The crate is organised bottom-up:
//!
//! * [`rng`] and [`episode`]: seeded random streams, trajectories, metrics;
//! * [`env`]: the planar obstacle-navigation task and enumerable finite MDPs;
//! * [`policy`]: Gaussian RBF, gated-linear and tabular softmax policies;
//! * [`estimators`]: classic REINFORCE, SPG-REINFORCE, SPG-Actor-Critic and the sigmoid safety critic;
//! * [`trainers`]: fixed-penalty and primal-dual training loops, evaluation, penalty sweeps;
//! * [`oracle`]: exact computations on finite MDPs (values, gradients, moments, dual functions, bounds);
//! * [`harness`]: experiment configs, checkpoints, CSV output and the command implementations behind `spg`.

pub mod env;
pub mod episode;
mod error;
pub mod estimators;
pub mod harness;
pub mod oracle;
pub mod policy;
pub mod rng;
pub mod trainers;

pub use error::{Error, Result};
