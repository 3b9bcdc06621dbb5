use nalgebra::{Cholesky, DMatrix, Dyn};

use super::{GpError, Result};

pub(crate) const JITTER_START: f64 = 1e-8;
pub(crate) const JITTER_MAX: f64 = 1e-2;

/// Cholesky factorization of a symmetric matrix. On failure the diagonal is
/// inflated by `1e-8`, then by ten times more, up to `1e-2`.
///
/// Returns the factorization and the jitter that was finally added (0 if none).
pub(crate) fn cholesky_with_jitter(a: &DMatrix<f64>, what: &str) -> Result<(Cholesky<f64, Dyn>, f64)> {
    if let Some(c) = Cholesky::new(a.clone()) {
        if factor_is_finite(&c) {
            return Ok((c, 0.0));
        }
    }
    let mut jitter = JITTER_START;
    while jitter <= JITTER_MAX * (1.0 + 1e-12) {
        let mut m = a.clone();
        for i in 0..m.nrows() {
            m[(i, i)] += jitter;
        }
        if let Some(c) = Cholesky::new(m) {
            if factor_is_finite(&c) {
                return Ok((c, jitter));
            }
        }
        jitter *= 10.0;
    }
    Err(GpError::Numerical(format!(
        "cholesky of {what} ({n}x{n}) failed with jitter up to {JITTER_MAX:e}; min diagonal {d:e}",
        n = a.nrows(),
        d = (0..a.nrows()).map(|i| a[(i, i)]).fold(f64::INFINITY, f64::min),
    )))
}

fn factor_is_finite(c: &Cholesky<f64, Dyn>) -> bool {
    c.l_dirty().iter().all(|v| v.is_finite())
}

/// `sum_i log L_ii`, i.e. half the log determinant.
pub(crate) fn half_log_det(c: &Cholesky<f64, Dyn>) -> f64 {
    let l = c.l_dirty();
    (0..l.nrows()).map(|i| l[(i, i)].ln()).sum()
}
