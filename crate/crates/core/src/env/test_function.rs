//! Stationary benchmark: the loss is a fixed function of the arm plus noise.
//!
//! `h(x) = 1 + 4 (x - 0.7)^2 + 0.3 sin^2(5 pi (x - 0.7))` has its global
//! minimum `h(0.7) = 1` and local minima roughly every 0.2 on either side.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{Counter, EnvError, Environment};
use crate::bandit::{Arm, LossObservation};
use crate::rng::{stream_rng, SeededRng, Stream};

pub const TEST_FUNCTION_MINIMIZER: f64 = 0.7;
pub const TEST_FUNCTION_MIN: f64 = 1.0;

pub fn test_function(x: f64) -> f64 {
    let d = x - TEST_FUNCTION_MINIMIZER;
    let s = (5.0 * PI * d).sin();
    TEST_FUNCTION_MIN + 4.0 * d * d + 0.3 * s * s
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestFunctionSpec {
    pub noise_sd: f64,
    /// Reported at interaction 0.
    pub initial_loss: f64,
}

impl Default for TestFunctionSpec {
    fn default() -> Self {
        Self { noise_sd: 0.1, initial_loss: 3.0 }
    }
}

#[derive(Debug, Clone)]
pub struct TestFunctionEnv {
    spec: TestFunctionSpec,
    rng: SeededRng,
    counter: Counter,
}

impl TestFunctionEnv {
    pub fn new(spec: TestFunctionSpec, seed: u64) -> Result<Self, EnvError> {
        if !(spec.noise_sd >= 0.0 && spec.noise_sd.is_finite() && spec.initial_loss.is_finite()) {
            return Err(EnvError::InvalidArgument(format!("invalid test function spec {spec:?}")));
        }
        Ok(Self { spec, rng: stream_rng(seed, Stream::Environment), counter: Counter::default() })
    }
}

impl Environment for TestFunctionEnv {
    fn init(&mut self) -> Result<LossObservation, EnvError> {
        self.counter.start()?;
        Ok(LossObservation::new(0, self.spec.initial_loss))
    }

    fn step(&mut self, arm: Arm<'_>, _updates: u64) -> Result<LossObservation, EnvError> {
        let &[x] = arm.point.coords() else {
            return Err(EnvError::InvalidArgument("test function takes one-dimensional arms".into()));
        };
        let t = self.counter.advance()?;
        let z: f64 = self.rng.sample(StandardNormal);
        Ok(LossObservation::new(t, test_function(x) + self.spec.noise_sd * z))
    }
}
