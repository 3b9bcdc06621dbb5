//! Exact Gaussian-process regression.
//!
//! The model is `r = f(x) + eps` with `f ~ GP(mean, kernel)` and
//! `eps ~ N(0, noise_variance)`. Everything here is dense and exact: the
//! Gram matrix is factorized with a Cholesky decomposition, escalating a
//! diagonal jitter when the factorization breaks down.

mod fit;
mod kernel;
mod likelihood;
pub(crate) mod linalg;
mod posterior;

pub use fit::{fit_type2_mle, FitBudget};
pub use kernel::{kernel_eval, KernelFamily, KernelSpec};
pub use likelihood::log_marginal_likelihood;
pub use posterior::{posterior, PosteriorGp, Prediction};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Lower bound on the observation noise variance.
pub const NOISE_FLOOR: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GpError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T, E = GpError> = std::result::Result<T, E>;

/// A point in the hyperparameter space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct InputPoint(Vec<f64>);

impl InputPoint {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(GpError::InvalidArgument("input point has no coordinates".into()));
        }
        if let Some(bad) = coords.iter().find(|c| !c.is_finite()) {
            return Err(GpError::InvalidArgument(format!("non-finite coordinate {bad}")));
        }
        Ok(Self(coords))
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

impl TryFrom<Vec<f64>> for InputPoint {
    type Error = GpError;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        InputPoint::new(v)
    }
}

impl From<InputPoint> for Vec<f64> {
    fn from(p: InputPoint) -> Self {
        p.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeanFamily {
    Zero,
    Constant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanSpec {
    pub family: MeanFamily,
    /// Only read for [`MeanFamily::Constant`].
    #[serde(default)]
    pub constant_value: f64,
}

impl MeanSpec {
    pub fn zero() -> Self {
        Self { family: MeanFamily::Zero, constant_value: 0.0 }
    }

    pub fn constant(value: f64) -> Self {
        Self { family: MeanFamily::Constant, constant_value: value }
    }

    pub fn eval(&self, _x: &InputPoint) -> f64 {
        match self.family {
            MeanFamily::Zero => 0.0,
            MeanFamily::Constant => self.constant_value,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpHyperparams {
    pub mean: MeanSpec,
    pub kernel: KernelSpec,
    pub noise_variance: f64,
}

impl GpHyperparams {
    /// Constant mean, Matérn-5/2 kernel with ARD lengthscales of 0.1, unit
    /// output scale and noise variance 0.01.
    pub fn default_for_dim(dim: usize) -> Self {
        Self {
            mean: MeanSpec::constant(0.0),
            kernel: KernelSpec::new(KernelFamily::Matern52, vec![0.1; dim], 1.0).expect("default kernel is valid"),
            noise_variance: 0.01,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.kernel.validate()?;
        if !(self.noise_variance > 0.0 && self.noise_variance.is_finite()) {
            return Err(GpError::InvalidArgument(format!(
                "noise variance must be positive, got {}",
                self.noise_variance
            )));
        }
        if !self.mean.constant_value.is_finite() {
            return Err(GpError::InvalidArgument("mean constant is not finite".into()));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.kernel.lengthscales.len()
    }

    /// Noise variance with the positivity floor applied.
    pub fn effective_noise(&self) -> f64 {
        self.noise_variance.max(NOISE_FLOOR)
    }
}

/// Observed targets at their inputs.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RegressionData {
    inputs: Vec<InputPoint>,
    targets: Vec<f64>,
}

impl RegressionData {
    pub fn new(inputs: Vec<InputPoint>, targets: Vec<f64>) -> Result<Self> {
        if inputs.len() != targets.len() {
            return Err(GpError::InvalidArgument(format!("{} inputs but {} targets", inputs.len(), targets.len())));
        }
        let mut data = RegressionData::default();
        for (x, y) in inputs.into_iter().zip(targets) {
            data.push(x, y)?;
        }
        Ok(data)
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn push(&mut self, x: InputPoint, y: f64) -> Result<()> {
        if !y.is_finite() {
            return Err(GpError::InvalidArgument(format!("non-finite target {y}")));
        }
        if let Some(first) = self.inputs.first() {
            if first.dim() != x.dim() {
                return Err(GpError::InvalidArgument(format!(
                    "input dimension {} does not match {}",
                    x.dim(),
                    first.dim()
                )));
            }
        }
        self.inputs.push(x);
        self.targets.push(y);
        Ok(())
    }

    pub fn inputs(&self) -> &[InputPoint] {
        &self.inputs
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    fn check_dim(&self, dim: usize) -> Result<()> {
        match self.inputs.first() {
            Some(x) if x.dim() != dim => Err(GpError::InvalidArgument(format!(
                "data dimension {} does not match kernel dimension {dim}",
                x.dim()
            ))),
            _ => Ok(()),
        }
    }
}
