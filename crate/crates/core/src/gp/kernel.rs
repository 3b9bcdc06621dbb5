use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{GpError, InputPoint, Result};

const SQRT_5: f64 = 2.236_067_977_499_79;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelFamily {
    SquaredExponential,
    Matern52,
}

/// Stationary ARD kernel: one lengthscale per input dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub family: KernelFamily,
    pub lengthscales: Vec<f64>,
    pub output_scale: f64,
}

impl KernelSpec {
    pub fn new(family: KernelFamily, lengthscales: Vec<f64>, output_scale: f64) -> Result<Self> {
        let spec = Self { family, lengthscales, output_scale };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.lengthscales.is_empty() {
            return Err(GpError::InvalidArgument("kernel has no lengthscales".into()));
        }
        if let Some(l) = self.lengthscales.iter().find(|l| !(**l > 0.0 && l.is_finite())) {
            return Err(GpError::InvalidArgument(format!("lengthscale must be positive, got {l}")));
        }
        if !(self.output_scale > 0.0 && self.output_scale.is_finite()) {
            return Err(GpError::InvalidArgument(format!("output scale must be positive, got {}", self.output_scale)));
        }
        Ok(())
    }

    fn check_dim(&self, x: &InputPoint) -> Result<()> {
        if x.dim() != self.lengthscales.len() {
            return Err(GpError::InvalidArgument(format!(
                "point has dimension {} but kernel has {} lengthscales",
                x.dim(),
                self.lengthscales.len()
            )));
        }
        Ok(())
    }

    /// Kernel value from an already scaled squared distance.
    pub(crate) fn at_sq_dist(&self, r2: f64) -> f64 {
        match self.family {
            KernelFamily::SquaredExponential => self.output_scale * (-0.5 * r2).exp(),
            KernelFamily::Matern52 => {
                let r = r2.sqrt();
                self.output_scale * (1.0 + SQRT_5 * r + 5.0 / 3.0 * r2) * (-SQRT_5 * r).exp()
            }
        }
    }

    pub(crate) fn sq_dist(&self, x: &[f64], y: &[f64]) -> f64 {
        x.iter()
            .zip(y)
            .zip(&self.lengthscales)
            .map(|((a, b), l)| {
                let d = (a - b) / l;
                d * d
            })
            .sum()
    }

    /// Unchecked evaluation; callers have validated dimensions.
    pub(crate) fn eval_raw(&self, x: &[f64], y: &[f64]) -> f64 {
        self.at_sq_dist(self.sq_dist(x, y))
    }

    /// Symmetric Gram matrix. Only the lower triangle is evaluated; the upper
    /// triangle is a bitwise mirror.
    pub fn gram(&self, xs: &[InputPoint]) -> Result<DMatrix<f64>> {
        for x in xs {
            self.check_dim(x)?;
        }
        let n = xs.len();
        let mut k = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..i {
                let v = self.eval_raw(xs[i].coords(), xs[j].coords());
                k[(i, j)] = v;
                k[(j, i)] = v;
            }
            k[(i, i)] = self.output_scale;
        }
        Ok(k)
    }

    /// Cross-covariance `K(xs, ys)` with shape `xs.len() x ys.len()`.
    pub fn cross(&self, xs: &[InputPoint], ys: &[InputPoint]) -> Result<DMatrix<f64>> {
        for p in xs.iter().chain(ys) {
            self.check_dim(p)?;
        }
        Ok(DMatrix::from_fn(xs.len(), ys.len(), |i, j| self.eval_raw(xs[i].coords(), ys[j].coords())))
    }
}

pub fn kernel_eval(spec: &KernelSpec, x: &InputPoint, x2: &InputPoint) -> Result<f64> {
    spec.check_dim(x)?;
    spec.check_dim(x2)?;
    Ok(spec.eval_raw(x.coords(), x2.coords()))
}
