use std::f64::consts::PI;

use indexmap::IndexMap;
use nalgebra::{DMatrix, DVector};

use super::linalg::{cholesky_with_jitter, half_log_det};
use super::{GpError, GpHyperparams, InputPoint, KernelSpec, MeanFamily, RegressionData, Result};

/// Exact log marginal likelihood `log N(r | m, K + s^2 I)` of the targets.
pub fn log_marginal_likelihood(hp: &GpHyperparams, data: &RegressionData) -> Result<f64> {
    hp.validate()?;
    if data.is_empty() {
        return Err(GpError::InvalidArgument("log marginal likelihood of empty data".into()));
    }
    data.check_dim(hp.dim())?;
    let n = data.len();
    let mut a = hp.kernel.gram(data.inputs())?;
    let noise = hp.effective_noise();
    for i in 0..n {
        a[(i, i)] += noise;
    }
    let (chol, _) = cholesky_with_jitter(&a, "K + noise I")?;
    let resid = DVector::from_iterator(n, data.inputs().iter().zip(data.targets()).map(|(x, y)| y - hp.mean.eval(x)));
    let alpha = chol.solve(&resid);
    let lml = -0.5 * resid.dot(&alpha) - half_log_det(&chol) - 0.5 * n as f64 * (2.0 * PI).ln();
    if !lml.is_finite() {
        return Err(GpError::Numerical(format!("log marginal likelihood is {lml}")));
    }
    Ok(lml)
}

/// Sufficient statistics of a dataset with repeated inputs.
///
/// When several targets share one input, the likelihood factorizes into a
/// Gaussian over the per-input means with covariance `K_m + s^2 diag(1/n_j)`
/// and a within-group term that depends only on the noise variance. The
/// result equals the dense likelihood exactly, at `O(m^3)` cost in the number
/// of distinct inputs rather than `O(T^3)`.
#[derive(Debug, Clone)]
pub(crate) struct GroupedData {
    inputs: Vec<InputPoint>,
    counts: Vec<f64>,
    means: Vec<f64>,
    /// Per-group sum of squared deviations from the group mean.
    within_ss: Vec<f64>,
    total: usize,
}

impl GroupedData {
    pub(crate) fn new(data: &RegressionData) -> Self {
        let mut groups: IndexMap<Vec<u64>, (InputPoint, Vec<f64>)> = IndexMap::new();
        for (x, y) in data.inputs().iter().zip(data.targets()) {
            let key = x.coords().iter().map(|c| c.to_bits()).collect();
            groups.entry(key).or_insert_with(|| (x.clone(), Vec::new())).1.push(*y);
        }
        let mut out = GroupedData {
            inputs: Vec::with_capacity(groups.len()),
            counts: Vec::with_capacity(groups.len()),
            means: Vec::with_capacity(groups.len()),
            within_ss: Vec::with_capacity(groups.len()),
            total: data.len(),
        };
        for (_, (x, ys)) in groups {
            let n = ys.len() as f64;
            let mean = ys.iter().sum::<f64>() / n;
            let ss = ys.iter().map(|y| (y - mean) * (y - mean)).sum();
            out.inputs.push(x);
            out.counts.push(n);
            out.means.push(mean);
            out.within_ss.push(ss);
        }
        out
    }

    pub(crate) fn distinct(&self) -> usize {
        self.inputs.len()
    }

    /// Log marginal likelihood for the given kernel and noise. For a constant
    /// mean the value is maximized over the constant in closed form
    /// (generalized least squares) and the maximizer is returned alongside.
    pub(crate) fn log_likelihood(&self, kernel: &KernelSpec, noise: f64, mean: MeanFamily) -> Result<(f64, f64)> {
        let m = self.distinct();
        let mut b: DMatrix<f64> = kernel.gram(&self.inputs)?;
        for j in 0..m {
            b[(j, j)] += noise / self.counts[j];
        }
        let (chol, _) = cholesky_with_jitter(&b, "grouped covariance")?;
        let ybar = DVector::from_column_slice(&self.means);
        let c = match mean {
            MeanFamily::Zero => 0.0,
            MeanFamily::Constant => {
                let ones = DVector::from_element(m, 1.0);
                let b_inv_ones = chol.solve(&ones);
                b_inv_ones.dot(&ybar) / b_inv_ones.sum()
            }
        };
        let resid = ybar.add_scalar(-c);
        let alpha = chol.solve(&resid);
        let mut lml = -0.5 * resid.dot(&alpha) - half_log_det(&chol) - 0.5 * m as f64 * (2.0 * PI).ln();
        for j in 0..m {
            let n = self.counts[j];
            lml += -0.5 * (n - 1.0) * (2.0 * PI * noise).ln() - 0.5 * n.ln() - self.within_ss[j] / (2.0 * noise);
        }
        debug_assert_eq!(self.counts.iter().sum::<f64>() as usize, self.total);
        if !lml.is_finite() {
            return Err(GpError::Numerical(format!("grouped log likelihood is {lml}")));
        }
        Ok((lml, c))
    }
}
