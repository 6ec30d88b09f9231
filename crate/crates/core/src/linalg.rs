//! Shared dense linear-algebra helpers: SPD factorization with a bounded
//! jitter-retry policy, and small matrix utilities used across the crate.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

/// Relative jitter unit applied to a failing SPD factorization.
const JITTER_REL: f64 = 1e-9;

/// Jitter escalation factor between retries.
const JITTER_ESCALATION: f64 = 10.0;

/// Number of jittered retries after the clean attempt.
const JITTER_RETRIES: u32 = 3;

/// Cholesky-factor a symmetric positive-definite matrix.
///
/// The first attempt is made on the matrix as given. If it fails, a jitter of
/// `1e-9 * max(trace/n, scale_floor)` is added to the diagonal, escalating by
/// a factor of 10 for up to three retries before giving up.
///
/// `scale_floor` anchors the jitter when the matrix itself has collapsed to
/// (numerical) zero, e.g. a conditional covariance of points fully explained
/// by the conditioning set; callers pass the natural variance scale of the
/// problem (for kernel-derived matrices, signal plus noise variance).
pub(crate) fn spd_cholesky(
    a: &DMatrix<f64>,
    scale_floor: f64,
    what: &str,
) -> Result<Cholesky<f64, Dyn>> {
    let n = a.nrows();
    if n == 0 {
        return Err(Error::invalid(format!("{what}: empty matrix")));
    }
    if let Some(chol) = a.clone().cholesky() {
        return Ok(chol);
    }
    let unit = JITTER_REL * (a.trace() / n as f64).max(scale_floor);
    if !unit.is_finite() || unit <= 0.0 {
        return Err(Error::ill_conditioned(format!(
            "{what}: factorization failed and no usable jitter scale"
        )));
    }
    let mut jitter = unit;
    for _ in 0..JITTER_RETRIES {
        let mut aj = a.clone();
        for i in 0..n {
            aj[(i, i)] += jitter;
        }
        if let Some(chol) = aj.cholesky() {
            return Ok(chol);
        }
        jitter *= JITTER_ESCALATION;
    }
    Err(Error::ill_conditioned(format!(
        "{what}: factorization failed after jitter up to {:.3e}",
        jitter / JITTER_ESCALATION
    )))
}

/// `max_ij |a_ij - b_ij|`.
pub fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    assert_eq!(a.shape(), b.shape());
    (a - b).abs().max()
}

/// `||a * a_inv - I||_inf` (max absolute entry), the inverse-quality residual.
pub fn identity_residual(a: &DMatrix<f64>, a_inv: &DMatrix<f64>) -> f64 {
    let n = a.nrows();
    let mut prod = a * a_inv;
    for i in 0..n {
        prod[(i, i)] -= 1.0;
    }
    prod.abs().max()
}

/// Replace `a` by its symmetric part `(a + a^T)/2`, removing roundoff skew.
pub(crate) fn symmetrize(a: &mut DMatrix<f64>) {
    let n = a.nrows();
    debug_assert_eq!(n, a.ncols());
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
    }
}

/// Append a column to an `n x k` matrix, returning an `n x (k+1)` matrix.
pub(crate) fn push_column(a: &DMatrix<f64>, col: &DVector<f64>) -> DMatrix<f64> {
    let (n, k) = a.shape();
    debug_assert_eq!(col.len(), n);
    DMatrix::from_fn(n, k + 1, |i, j| if j < k { a[(i, j)] } else { col[i] })
}
