//! Desk-scale stand-in for pre-training loss curves.
//!
//! The loss decays towards a floor. How fast it decays depends on how close
//! the chosen hyperparameters are to an optimum, and the step size shrinks
//! like `u / (u + t)`:
//!
//! ```text
//! g(x)   = exp(-sum_i ((x_i - opt_i) / width_i)^2)
//! y_t    = floor + (y_{t-1} - floor) * (1 - rate * g(x_t) * u / (u + t)) + noise
//! ```
//!
//! clamped below at `floor`.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{Counter, EnvError, Environment};
use crate::bandit::{Arm, LossObservation};
use crate::rng::{stream_rng, SeededRng, Stream};

/// Moves the optimum from `from_interaction` onward.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimumShift {
    pub from_interaction: u64,
    pub optimum: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticPretrainSpec {
    pub initial_loss: f64,
    pub floor: f64,
    pub optimum: Vec<f64>,
    pub width: Vec<f64>,
    pub rate: f64,
    pub noise_sd: f64,
    /// Optional nonstationary mode; shifts must be sorted by interaction.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub schedule: Vec<OptimumShift>,
}

impl Default for SyntheticPretrainSpec {
    fn default() -> Self {
        Self::default_for_dim(1)
    }
}

impl SyntheticPretrainSpec {
    pub fn default_for_dim(dim: usize) -> Self {
        Self {
            initial_loss: 10.0,
            floor: 1.5,
            optimum: vec![0.15; dim],
            width: vec![0.1; dim],
            rate: 0.3,
            noise_sd: 0.05,
            schedule: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<(), EnvError> {
        let bad = |m: String| Err(EnvError::InvalidArgument(m));
        if !(self.initial_loss.is_finite() && self.floor.is_finite() && self.floor <= self.initial_loss) {
            return bad(format!("need finite floor <= initial loss, got {} and {}", self.floor, self.initial_loss));
        }
        if self.optimum.is_empty() || self.optimum.len() != self.width.len() {
            return bad("optimum and width must have the same, nonzero length".into());
        }
        if self.width.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
            return bad("widths must be positive".into());
        }
        if !(self.rate > 0.0 && self.rate <= 1.0) {
            return bad(format!("rate must be in (0, 1], got {}", self.rate));
        }
        if !(self.noise_sd >= 0.0 && self.noise_sd.is_finite()) {
            return bad(format!("noise sd must be nonnegative, got {}", self.noise_sd));
        }
        let mut last = 0;
        for s in &self.schedule {
            if s.optimum.len() != self.optimum.len() || s.from_interaction < last {
                return bad("schedule entries must match the optimum dimension and be sorted".into());
            }
            last = s.from_interaction;
        }
        Ok(())
    }

    pub fn optimum_at(&self, t: u64) -> &[f64] {
        self.schedule.iter().rev().find(|s| s.from_interaction <= t).map_or(&self.optimum, |s| &s.optimum)
    }

    /// Training efficiency of `x` at interaction `t`, in `(0, 1]`.
    pub fn efficiency(&self, x: &[f64], t: u64) -> f64 {
        let opt = self.optimum_at(t);
        let s: f64 = x
            .iter()
            .zip(opt)
            .zip(&self.width)
            .map(|((v, o), w)| {
                let z = (v - o) / w;
                z * z
            })
            .sum();
        (-s).exp()
    }

    /// One application of the loss recurrence with a given standard-normal draw.
    pub fn next_loss(&self, prev: f64, x: &[f64], updates: u64, t: u64, z: f64) -> f64 {
        let u = updates as f64;
        let decay = 1.0 - self.rate * self.efficiency(x, t) * u / (u + t as f64);
        let y = self.floor + (prev - self.floor) * decay + self.noise_sd * z;
        y.max(self.floor)
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticEnv {
    spec: SyntheticPretrainSpec,
    rng: SeededRng,
    counter: Counter,
    loss: f64,
}

impl SyntheticEnv {
    pub fn new(spec: SyntheticPretrainSpec, seed: u64) -> Result<Self, EnvError> {
        spec.validate()?;
        let loss = spec.initial_loss;
        Ok(Self { spec, rng: stream_rng(seed, Stream::Environment), counter: Counter::default(), loss })
    }

    pub fn spec(&self) -> &SyntheticPretrainSpec {
        &self.spec
    }

    /// Loss step keyed by coordinates alone, for callers without an arm index.
    pub fn step_point(&mut self, x: &[f64], updates: u64) -> Result<LossObservation, EnvError> {
        if x.len() != self.spec.optimum.len() {
            return Err(EnvError::InvalidArgument(format!(
                "arm has {} coordinates, environment expects {}",
                x.len(),
                self.spec.optimum.len()
            )));
        }
        let t = self.counter.advance()?;
        let z: f64 = self.rng.sample(StandardNormal);
        self.loss = self.spec.next_loss(self.loss, x, updates, t, z);
        Ok(LossObservation::new(t, self.loss))
    }
}

impl Environment for SyntheticEnv {
    fn init(&mut self) -> Result<LossObservation, EnvError> {
        self.counter.start()?;
        Ok(LossObservation::new(0, self.spec.initial_loss))
    }

    fn step(&mut self, arm: Arm<'_>, updates: u64) -> Result<LossObservation, EnvError> {
        self.step_point(arm.point.coords(), updates)
    }
}
