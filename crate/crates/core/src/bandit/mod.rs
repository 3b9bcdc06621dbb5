//! Arm spaces, loss-difference rewards, interaction history and policies.

mod arms;
mod history;
mod policy;

pub use arms::{make_grid, Arm, ArmSpace, GridDim};
pub use history::{cumulative_reward, reward_from_losses, telescoping_error, History, LossObservation, RewardRecord};
pub use policy::{run_policy, ts_select_arm, PolicyConfig, PolicyKind, RunOutcome};

use thiserror::Error;

use crate::env::EnvError;
use crate::gp::GpError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BanditError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

#[derive(Debug, Error)]
pub enum PolicyError {
    #[error(transparent)]
    Bandit(#[from] BanditError),
    #[error("GP: {0}")]
    Numerical(GpError),
    #[error("environment: {0}")]
    Environment(#[from] EnvError),
}

impl From<GpError> for PolicyError {
    fn from(e: GpError) -> Self {
        match e {
            GpError::InvalidArgument(msg) => PolicyError::Bandit(BanditError::InvalidArgument(msg)),
            GpError::Numerical(_) => PolicyError::Numerical(e),
        }
    }
}
