use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use super::linalg::cholesky_with_jitter;
use super::{GpError, GpHyperparams, InputPoint, RegressionData, Result};

/// A GP conditioned on data, with the factorization of `K_T + s^2 I` cached.
///
/// Immutable once built.
#[derive(Debug, Clone)]
pub struct PosteriorGp {
    hyperparams: GpHyperparams,
    data: RegressionData,
    chol: DMatrix<f64>,
    alpha: DVector<f64>,
    jitter: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub mean: Vec<f64>,
    /// Symmetric, with the diagonal clamped at zero.
    pub cov: DMatrix<f64>,
}

pub fn posterior(hp: &GpHyperparams, data: &RegressionData) -> Result<PosteriorGp> {
    hp.validate()?;
    data.check_dim(hp.dim())?;
    let n = data.len();
    if n == 0 {
        return Ok(PosteriorGp {
            hyperparams: hp.clone(),
            data: data.clone(),
            chol: DMatrix::zeros(0, 0),
            alpha: DVector::zeros(0),
            jitter: 0.0,
        });
    }
    let mut a = hp.kernel.gram(data.inputs())?;
    let noise = hp.effective_noise();
    for i in 0..n {
        a[(i, i)] += noise;
    }
    let (chol, jitter) = cholesky_with_jitter(&a, "K + noise I")?;
    let resid = DVector::from_iterator(n, data.inputs().iter().zip(data.targets()).map(|(x, y)| y - hp.mean.eval(x)));
    let alpha = chol.solve(&resid);
    Ok(PosteriorGp { hyperparams: hp.clone(), data: data.clone(), chol: chol.l(), alpha, jitter })
}

impl PosteriorGp {
    pub fn hyperparams(&self) -> &GpHyperparams {
        &self.hyperparams
    }

    pub fn data(&self) -> &RegressionData {
        &self.data
    }

    /// Lower-triangular factor `L` with `L L^T = K_T + (s^2 + jitter) I`.
    pub fn chol_factor(&self) -> &DMatrix<f64> {
        &self.chol
    }

    pub fn alpha(&self) -> &DVector<f64> {
        &self.alpha
    }

    /// Diagonal jitter that the factorization needed beyond the noise.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// Predictive mean and covariance of the latent function at `queries`.
    pub fn predict(&self, queries: &[InputPoint]) -> Result<Prediction> {
        if queries.is_empty() {
            return Err(GpError::InvalidArgument("no query points".into()));
        }
        let kernel = &self.hyperparams.kernel;
        let mut cov = kernel.gram(queries)?;
        let m = queries.len();
        let mut mean: Vec<f64> = queries.iter().map(|q| self.hyperparams.mean.eval(q)).collect();
        if !self.data.is_empty() {
            let k_star = kernel.cross(self.data.inputs(), queries)?;
            let proj = k_star.tr_mul(&self.alpha);
            for (mu, p) in mean.iter_mut().zip(proj.iter()) {
                *mu += p;
            }
            let v = self
                .chol
                .solve_lower_triangular(&k_star)
                .ok_or_else(|| GpError::Numerical("singular cholesky factor".into()))?;
            let reduction = v.tr_mul(&v);
            for i in 0..m {
                for j in 0..=i {
                    let c = cov[(i, j)] - reduction[(i, j)];
                    cov[(i, j)] = c;
                    cov[(j, i)] = c;
                }
            }
        }
        for i in 0..m {
            if cov[(i, i)] < 0.0 {
                cov[(i, i)] = 0.0;
            }
        }
        Ok(Prediction { mean, cov })
    }

    /// One draw from the joint predictive distribution at `queries`.
    pub fn sample_joint<R: Rng + ?Sized>(&self, queries: &[InputPoint], rng: &mut R) -> Result<Vec<f64>> {
        let pred = self.predict(queries)?;
        let cov = (&pred.cov + pred.cov.transpose()) * 0.5;
        let (chol, _) = cholesky_with_jitter(&cov, "predictive covariance")?;
        let z = DVector::from_iterator(queries.len(), (0..queries.len()).map(|_| rng.sample::<f64, _>(StandardNormal)));
        let draw = chol.l() * z;
        Ok(pred.mean.iter().zip(draw.iter()).map(|(m, d)| m + d).collect())
    }
}
