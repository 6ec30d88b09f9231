//! Greedy support-set selection: repeatedly pick the candidate with the
//! largest noise-free posterior variance given the locations already chosen.
//! Implemented as a pivoted-Cholesky sweep so the whole selection costs
//! `O(n k^2)`; ties break toward the lowest candidate index, making the
//! result deterministic and every prefix of a larger selection identical to
//! the smaller selection.

use crate::error::{Error, Result};
use crate::gp::{covariance_unchecked, Hyperparams, Location};
use crate::sparse::SupportSet;

pub fn select_support_set(
    candidates: &[Location],
    k: usize,
    h: &Hyperparams,
) -> Result<SupportSet> {
    if k == 0 {
        return Err(Error::invalid("support size must be positive"));
    }
    if k > candidates.len() {
        return Err(Error::invalid(format!(
            "cannot select {k} support locations from {} candidates",
            candidates.len()
        )));
    }
    for c in candidates {
        if c.dim() != h.dim() {
            return Err(Error::invalid("candidate dimension mismatch"));
        }
    }
    // Noise-free conditional variances, updated by partial Cholesky rows.
    let noise_free = Hyperparams::new(
        h.signal_var(),
        0.0,
        h.length_scales().to_vec(),
        h.prior_mean(),
    )?;
    let n = candidates.len();
    let mut variance: Vec<f64> = candidates
        .iter()
        .map(|c| covariance_unchecked(c, c, &noise_free))
        .collect();
    let mut rows: Vec<Vec<f64>> = vec![Vec::with_capacity(k); n];
    let mut chosen: Vec<usize> = Vec::with_capacity(k);
    let mut available = vec![true; n];

    for _ in 0..k {
        let mut best = usize::MAX;
        let mut best_var = f64::NEG_INFINITY;
        for i in 0..n {
            if available[i] && variance[i] > best_var {
                best_var = variance[i];
                best = i;
            }
        }
        if best == usize::MAX {
            return Err(Error::invalid("ran out of candidates"));
        }
        // Guard against numerically exhausted variance; selection still
        // proceeds by the tie-break order.
        let pivot = best_var.max(1e-300).sqrt();
        chosen.push(best);
        available[best] = false;
        let pivot_row = rows[best].clone();
        for i in 0..n {
            if !available[i] {
                continue;
            }
            let mut cross = covariance_unchecked(&candidates[i], &candidates[best], &noise_free);
            for (a, b) in rows[i].iter().zip(&pivot_row) {
                cross -= a * b;
            }
            let e = cross / pivot;
            variance[i] -= e * e;
            rows[i].push(e);
        }
    }
    SupportSet::new(chosen.into_iter().map(|i| candidates[i].clone()).collect())
}
