//! Gaussian-process Thompson sampling for online selection of training
//! hyperparameters.
//!
//! A policy repeatedly picks a hyperparameter configuration (an arm), lets a
//! trainer run a fixed number of updates with it, and scores the arm by how
//! much the validation loss dropped. Because rewards are loss differences,
//! their sum telescopes to `initial_loss - final_loss`, so maximizing reward
//! is the same as minimizing the final loss.

pub mod bandit;
pub mod bridge;
pub mod env;
pub mod gp;
pub mod harness;
pub mod rng;
