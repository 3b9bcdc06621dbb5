//! Trainers seen as black boxes: pick hyperparameters, run some updates,
//! read back a validation loss.

mod replay;
mod synthetic;
mod test_function;

pub use replay::{write_replay_csv, ReplayEnv, ReplaySpec, REPLAY_HEADER};
pub use synthetic::{OptimumShift, SyntheticEnv, SyntheticPretrainSpec};
pub use test_function::{test_function, TestFunctionEnv, TestFunctionSpec, TEST_FUNCTION_MIN, TEST_FUNCTION_MINIMIZER};

use thiserror::Error;

use crate::bandit::{Arm, LossObservation};
use crate::bridge::BridgeError;

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("environment used before init")]
    NotInitialized,
    #[error("environment initialized twice")]
    AlreadyInitialized,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("protocol violation: {0}")]
    Protocol(String),
    #[error("trainer failed: {0}")]
    Failed(String),
    #[error(transparent)]
    Bridge(#[from] BridgeError),
}

/// A trainer driven one interaction at a time.
///
/// `init` is called exactly once and reports the untrained model's loss as
/// interaction 0; each `step` then trains with the given arm for `updates`
/// updates and reports interactions 1, 2, ... without gaps. Implementations
/// own their random stream.
pub trait Environment {
    fn init(&mut self) -> Result<LossObservation, EnvError>;
    fn step(&mut self, arm: Arm<'_>, updates: u64) -> Result<LossObservation, EnvError>;
}

impl<E: Environment + ?Sized> Environment for Box<E> {
    fn init(&mut self) -> Result<LossObservation, EnvError> {
        (**self).init()
    }

    fn step(&mut self, arm: Arm<'_>, updates: u64) -> Result<LossObservation, EnvError> {
        (**self).step(arm, updates)
    }
}

/// Interaction counter shared by the in-process environments.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct Counter {
    next: Option<u64>,
}

impl Counter {
    pub(crate) fn start(&mut self) -> Result<(), EnvError> {
        if self.next.is_some() {
            return Err(EnvError::AlreadyInitialized);
        }
        self.next = Some(1);
        Ok(())
    }

    /// Index of the interaction about to run.
    pub(crate) fn peek(&self) -> Result<u64, EnvError> {
        self.next.ok_or(EnvError::NotInitialized)
    }

    pub(crate) fn advance(&mut self) -> Result<u64, EnvError> {
        let t = self.peek()?;
        self.next = Some(t + 1);
        Ok(t)
    }
}
