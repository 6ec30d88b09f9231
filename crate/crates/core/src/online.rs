//! Streaming sparse GP with constant time and memory per step.
//!
//! Observations arrive one at a time into a recent buffer of at most `tau`
//! points. When the buffer fills, it is compressed into a fixed-size slice
//! summary `(mu_s, sigma_s)` through the support set and folded into the
//! running assimilated summary `(mu_a, sigma_a)`; the raw observations are
//! then discarded. Predictions combine the assimilated summary (closed form
//! in support space) with exact Gaussian conditioning on the not-yet-
//! summarized buffer.
//!
//! All inverses are maintained incrementally: `sigma_a^{-1}` by a rank-`tau`
//! matrix-inversion-lemma update per assimilation, and the buffer's
//! predictive-covariance inverse by a one-row block-inverse extension per
//! push, reusing the cached per-column products so each push costs
//! `O(|S|^2)`. Every update is verified against the identity residual
//! `||sigma_a * sigma_a^{-1} - I||_inf` and falls back to a fresh
//! factorization if drift is detected.
//!
//! State size depends only on `(|S|, tau, d)` — never on how many slices
//! have been assimilated.

use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::gp::{
    clamp_variance, cov_matrix, cov_vector, covariance_unchecked, Dataset, GaussianPredictive,
    Hyperparams, Location,
};
use crate::linalg::{identity_residual, push_column, spd_cholesky, symmetrize};
use crate::sparse::SupportSet;

/// Identity-residual threshold above which the maintained inverse is
/// rebuilt from a fresh factorization.
const INVERSE_RESIDUAL_LIMIT: f64 = 1e-7;

/// Relative floor below which a pushed point's conditional predictive
/// variance is treated as degenerate.
const SCHUR_FLOOR_REL: f64 = 1e-12;

const SNAPSHOT_MAGIC: &[u8; 4] = b"OGPS";
const SNAPSHOT_VERSION: u32 = 1;

/// Fixed-size compression of one slice of `tau` observations through the
/// support set: `mu_s = U C^{-1} (z - mu)` and `sigma_s = U C^{-1} U^T`,
/// with `U = Sigma_{S,D_n}` and `C = Sigma_{D_n,D_n|S}`.
#[derive(Debug, Clone)]
pub struct SliceSummary {
    mu_s: DVector<f64>,
    sigma_s: DMatrix<f64>,
    /// Low-rank factor with `sigma_s = factor * factor^T`; lets assimilation
    /// update `sigma_a^{-1}` with an inner system of only `tau` rows.
    factor: DMatrix<f64>,
}

impl SliceSummary {
    /// Build a summary from raw `(mu_s, sigma_s)`. `sigma_s` must be
    /// symmetric within 1e-10 and PSD up to a -1e-8 relative eigenvalue
    /// tolerance; a factor is recovered by eigendecomposition.
    pub fn new(mu_s: DVector<f64>, sigma_s: DMatrix<f64>) -> Result<Self> {
        let n = mu_s.len();
        if sigma_s.nrows() != n || sigma_s.ncols() != n {
            return Err(Error::invalid("sigma_s shape does not match mu_s length"));
        }
        let skew = (&sigma_s - sigma_s.transpose()).abs().max();
        if skew > 1e-10 {
            return Err(Error::invalid(format!(
                "sigma_s is not symmetric (skew {skew:.3e})"
            )));
        }
        let eig = sigma_s.clone().symmetric_eigen();
        let max_eig = eig.eigenvalues.iter().cloned().fold(0.0f64, f64::max);
        let min_eig = eig.eigenvalues.iter().cloned().fold(0.0f64, f64::min);
        if min_eig < -1e-8 * max_eig.max(f64::MIN_POSITIVE) {
            return Err(Error::invalid(format!(
                "sigma_s is not positive semidefinite (min eigenvalue {min_eig:.3e})"
            )));
        }
        let kept: Vec<usize> = (0..n)
            .filter(|&i| eig.eigenvalues[i] > 1e-14 * max_eig)
            .collect();
        let factor = DMatrix::from_fn(n, kept.len(), |i, j| {
            eig.eigenvectors[(i, kept[j])] * eig.eigenvalues[kept[j]].sqrt()
        });
        Ok(SliceSummary {
            mu_s,
            sigma_s,
            factor,
        })
    }

    fn from_factor(mu_s: DVector<f64>, sigma_s: DMatrix<f64>, factor: DMatrix<f64>) -> Self {
        SliceSummary {
            mu_s,
            sigma_s,
            factor,
        }
    }

    pub fn mu_s(&self) -> &DVector<f64> {
        &self.mu_s
    }

    pub fn sigma_s(&self) -> &DMatrix<f64> {
        &self.sigma_s
    }

    pub fn dim(&self) -> usize {
        self.mu_s.len()
    }
}

/// The constant-memory streaming GP state: support set, assimilated summary
/// with cached inverse, and the recent buffer with its cached factorizations.
///
/// Single-writer: one agent may assimilate/push/flush at a time; predictions
/// are read-only and may run concurrently with each other but not with a
/// writer.
#[derive(Debug, Clone)]
pub struct OnlineGpState {
    support: SupportSet,
    h: Hyperparams,
    tau: usize,
    slices: u64,
    mu_a: DVector<f64>,
    sigma_a: DMatrix<f64>,
    sigma_a_inv: DMatrix<f64>,
    sigma_ss: DMatrix<f64>,
    sigma_ss_inv: DMatrix<f64>,
    // Caches derived from the summary; refreshed after every assimilation.
    a_weights: DVector<f64>, // sigma_a_inv * mu_a
    inv_diff: DMatrix<f64>,  // sigma_ss_inv - sigma_a_inv
    // Recent buffer D' and its cached factorizations.
    recent: Dataset,
    recent_cross: DMatrix<f64>, // Sigma_{S,D'}
    recent_w: DMatrix<f64>,     // inv_diff * Sigma_{S,D'}
    recent_mu: DVector<f64>,    // online predictive means at the buffer points
    recent_inv: DMatrix<f64>,   // inverse of the buffer predictive covariance
    rebuilds: u64,
}

impl OnlineGpState {
    /// Initial state: no slices assimilated (`mu_a = 0`, `sigma_a =
    /// Sigma_SS`), empty buffer, support-Gram inverse computed once.
    pub fn new(support: SupportSet, h: &Hyperparams, tau: usize) -> Result<Self> {
        if tau == 0 {
            return Err(Error::invalid("tau must be at least 1"));
        }
        for x in support.locations() {
            if x.dim() != h.dim() {
                return Err(Error::invalid(
                    "support location dimension does not match hyperparameters",
                ));
            }
        }
        let m = support.len();
        let sigma_ss = cov_matrix(support.locations(), support.locations(), h)?;
        let chol = spd_cholesky(&sigma_ss, h.scale(), "support Gram matrix")?;
        let mut sigma_ss_inv = chol.inverse();
        symmetrize(&mut sigma_ss_inv);
        Ok(OnlineGpState {
            support,
            h: h.clone(),
            tau,
            slices: 0,
            mu_a: DVector::zeros(m),
            sigma_a: sigma_ss.clone(),
            sigma_a_inv: sigma_ss_inv.clone(),
            sigma_ss,
            sigma_ss_inv,
            a_weights: DVector::zeros(m),
            inv_diff: DMatrix::zeros(m, m),
            recent: Dataset::empty(),
            recent_cross: DMatrix::zeros(m, 0),
            recent_w: DMatrix::zeros(m, 0),
            recent_mu: DVector::zeros(0),
            recent_inv: DMatrix::zeros(0, 0),
            rebuilds: 0,
        })
    }

    pub fn support(&self) -> &SupportSet {
        &self.support
    }

    pub fn hyperparams(&self) -> &Hyperparams {
        &self.h
    }

    pub fn tau(&self) -> usize {
        self.tau
    }

    pub fn slices_assimilated(&self) -> u64 {
        self.slices
    }

    pub fn recent(&self) -> &Dataset {
        &self.recent
    }

    pub fn recent_len(&self) -> usize {
        self.recent.len()
    }

    pub fn mu_a(&self) -> &DVector<f64> {
        &self.mu_a
    }

    pub fn sigma_a(&self) -> &DMatrix<f64> {
        &self.sigma_a
    }

    pub fn sigma_a_inv(&self) -> &DMatrix<f64> {
        &self.sigma_a_inv
    }

    pub fn sigma_ss(&self) -> &DMatrix<f64> {
        &self.sigma_ss
    }

    pub fn sigma_ss_inv(&self) -> &DMatrix<f64> {
        &self.sigma_ss_inv
    }

    pub fn recent_inv(&self) -> &DMatrix<f64> {
        &self.recent_inv
    }

    /// Number of times inverse drift forced a fresh factorization.
    pub fn inverse_rebuilds(&self) -> u64 {
        self.rebuilds
    }

    /// Compress a full slice of `tau` observations through the support set.
    pub fn summarize_slice(&self, slice: &Dataset) -> Result<SliceSummary> {
        if slice.len() != self.tau {
            return Err(Error::invalid(format!(
                "slice has {} observations, expected tau = {}",
                slice.len(),
                self.tau
            )));
        }
        if self.h.noise_var() == 0.0 && slice.has_duplicates() {
            return Err(Error::invalid(
                "duplicate locations in a slice with zero noise variance",
            ));
        }
        let u = cov_matrix(self.support.locations(), slice.locations(), &self.h)?;
        let gram = cov_matrix(slice.locations(), slice.locations(), &self.h)?;
        let mut cond = gram - u.transpose() * (&self.sigma_ss_inv * &u);
        symmetrize(&mut cond);
        let chol = spd_cholesky(&cond, self.h.scale(), "slice conditional covariance")?;
        let resid = DVector::from_fn(slice.len(), |i, _| slice.values()[i] - self.h.prior_mean());
        let mu_s = &u * chol.solve(&resid);
        // factor = U L^{-T}, so sigma_s = factor factor^T exactly.
        let factor = chol
            .l()
            .solve_lower_triangular(&u.transpose())
            .expect("nonsingular Cholesky factor")
            .transpose();
        let mut sigma_s = &factor * factor.transpose();
        symmetrize(&mut sigma_s);
        Ok(SliceSummary::from_factor(mu_s, sigma_s, factor))
    }

    /// Fold a slice summary into the assimilated summary. The cached
    /// `sigma_a^{-1}` is advanced by the matrix inversion lemma using the
    /// summary's rank-`tau` factor, then validated. Requires an empty buffer
    /// (the flush protocol clears it first).
    pub fn assimilate(&mut self, slice: &SliceSummary) -> Result<()> {
        if slice.dim() != self.support.len() {
            return Err(Error::invalid(format!(
                "summary dimension {} does not match support size {}",
                slice.dim(),
                self.support.len()
            )));
        }
        if !self.recent.is_empty() {
            return Err(Error::invalid(
                "assimilate requires an empty recent buffer; flush first",
            ));
        }
        self.mu_a += &slice.mu_s;
        self.sigma_a += &slice.sigma_s;
        symmetrize(&mut self.sigma_a);

        let r = slice.factor.ncols();
        if r > 0 {
            // (A + F F^T)^{-1} = A^{-1} - A^{-1} F (I + F^T A^{-1} F)^{-1} F^T A^{-1}
            let t = &self.sigma_a_inv * &slice.factor;
            let mut inner = slice.factor.transpose() * &t;
            for i in 0..r {
                inner[(i, i)] += 1.0;
            }
            symmetrize(&mut inner);
            match spd_cholesky(&inner, 1.0, "assimilation inner system") {
                Ok(chol) => {
                    self.sigma_a_inv -= &t * chol.solve(&t.transpose());
                    symmetrize(&mut self.sigma_a_inv);
                }
                Err(_) => self.rebuild_inverse()?,
            }
        }
        if identity_residual(&self.sigma_a, &self.sigma_a_inv) > INVERSE_RESIDUAL_LIMIT {
            self.rebuild_inverse()?;
        }
        self.slices += 1;
        self.refresh_summary_caches();
        Ok(())
    }

    fn rebuild_inverse(&mut self) -> Result<()> {
        let chol = spd_cholesky(&self.sigma_a, self.h.scale(), "assimilated summary")?;
        self.sigma_a_inv = chol.inverse();
        symmetrize(&mut self.sigma_a_inv);
        self.rebuilds += 1;
        Ok(())
    }

    fn refresh_summary_caches(&mut self) {
        self.a_weights = &self.sigma_a_inv * &self.mu_a;
        self.inv_diff = &self.sigma_ss_inv - &self.sigma_a_inv;
    }

    /// Predictive distribution from the assimilated summary alone (the
    /// buffer is ignored): `mean = mu_x + k_x^T sigma_a^{-1} mu_a`,
    /// `var = sigma_xx - k_x^T (sigma_ss^{-1} - sigma_a^{-1}) k_x`.
    /// Cost `O(|S|^2)` regardless of how many slices were assimilated.
    pub fn predict(&self, x: &Location) -> Result<GaussianPredictive> {
        let k = cov_vector(self.support.locations(), x, &self.h);
        let mean = self.h.prior_mean() + k.dot(&self.a_weights);
        let prior_var = covariance_unchecked(x, x, &self.h);
        let variance = prior_var - k.dot(&(&self.inv_diff * &k));
        Ok(GaussianPredictive {
            mean,
            variance: clamp_variance(variance, &self.h, "online predict")?,
        })
    }

    /// Predictive cross-covariance row between `x` and the buffer under the
    /// assimilated summary, reusing the cached per-column products.
    fn recent_cross_row(&self, k: &DVector<f64>, x: &Location) -> DVector<f64> {
        DVector::from_fn(self.recent.len(), |i, _| {
            covariance_unchecked(x, &self.recent.locations()[i], &self.h)
                - k.dot(&self.recent_w.column(i))
        })
    }

    /// Append one observation to the recent buffer, extending the cached
    /// inverse of the buffer's predictive covariance by one row/column in
    /// `O(|S|^2)` time.
    pub fn push_recent(&mut self, x: Location, z: f64) -> Result<()> {
        if self.recent.len() >= self.tau {
            return Err(Error::BufferFull(self.recent.len()));
        }
        if !z.is_finite() {
            return Err(Error::invalid("observation value must be finite"));
        }
        if x.dim() != self.h.dim() {
            return Err(Error::invalid("observation dimension mismatch"));
        }
        if self.h.noise_var() == 0.0 && self.recent.locations().contains(&x) {
            return Err(Error::invalid(
                "duplicate buffer location with zero noise variance",
            ));
        }
        let k = cov_vector(self.support.locations(), &x, &self.h);
        let w = &self.inv_diff * &k;
        let mu_x = self.h.prior_mean() + k.dot(&self.a_weights);
        let prior_var = covariance_unchecked(&x, &x, &self.h);
        let var_x = prior_var - k.dot(&w);
        let cross = self.recent_cross_row(&k, &x);

        let r = self.recent.len();
        let (schur, v) = if r == 0 {
            (var_x, DVector::zeros(0))
        } else {
            let v = &self.recent_inv * &cross;
            (var_x - cross.dot(&v), v)
        };
        if schur <= SCHUR_FLOOR_REL * self.h.scale() {
            return Err(Error::ill_conditioned(format!(
                "degenerate predictive variance {schur:.3e} at pushed location"
            )));
        }
        // One-row block-inverse extension from the Schur complement.
        let mut next_inv = DMatrix::zeros(r + 1, r + 1);
        for i in 0..r {
            for j in 0..r {
                next_inv[(i, j)] = self.recent_inv[(i, j)] + v[i] * v[j] / schur;
            }
            next_inv[(i, r)] = -v[i] / schur;
            next_inv[(r, i)] = -v[i] / schur;
        }
        next_inv[(r, r)] = 1.0 / schur;
        symmetrize(&mut next_inv);

        self.recent_inv = next_inv;
        self.recent_cross = push_column(&self.recent_cross, &k);
        self.recent_w = push_column(&self.recent_w, &w);
        self.recent_mu = self.recent_mu.clone().push(mu_x);
        self.recent.push(x, z);
        Ok(())
    }

    /// Predictive distribution folding in the recent buffer by exact
    /// Gaussian conditioning on top of the assimilated summary. With an
    /// empty buffer this is identical to [`predict`](Self::predict).
    pub fn predict_with_recent(&self, x: &Location) -> Result<GaussianPredictive> {
        if self.recent.is_empty() {
            return self.predict(x);
        }
        let k = cov_vector(self.support.locations(), x, &self.h);
        let mean_base = self.h.prior_mean() + k.dot(&self.a_weights);
        let prior_var = covariance_unchecked(x, x, &self.h);
        let var_base = prior_var - k.dot(&(&self.inv_diff * &k));
        let cross = self.recent_cross_row(&k, x);
        let resid = self.recent.values_vector() - &self.recent_mu;
        let sol = &self.recent_inv * &resid;
        let mean = mean_base + cross.dot(&sol);
        let variance = var_base - cross.dot(&(&self.recent_inv * &cross));
        Ok(GaussianPredictive {
            mean,
            variance: clamp_variance(variance, &self.h, "online predict with recent")?,
        })
    }

    /// Summarize the full buffer, assimilate it, and clear the buffer with
    /// its cached factorizations. Requires exactly `tau` buffered
    /// observations.
    pub fn flush_recent(&mut self) -> Result<()> {
        if self.recent.len() != self.tau {
            return Err(Error::invalid(format!(
                "flush_recent requires a full buffer of {} observations, have {}",
                self.tau,
                self.recent.len()
            )));
        }
        let slice = std::mem::replace(&mut self.recent, Dataset::empty());
        let summary = self.summarize_slice(&slice)?;
        self.clear_recent_caches();
        self.assimilate(&summary)
    }

    fn clear_recent_caches(&mut self) {
        let m = self.support.len();
        self.recent = Dataset::empty();
        self.recent_cross = DMatrix::zeros(m, 0);
        self.recent_w = DMatrix::zeros(m, 0);
        self.recent_mu = DVector::zeros(0);
        self.recent_inv = DMatrix::zeros(0, 0);
    }

    /// Push an observation, flushing automatically when the buffer reaches
    /// `tau`. This is the per-step streaming entry point.
    pub fn observe(&mut self, x: Location, z: f64) -> Result<()> {
        self.push_recent(x, z)?;
        if self.recent.len() == self.tau {
            self.flush_recent()?;
        }
        Ok(())
    }

    /// Serialized snapshot size in bytes.
    pub fn snapshot_len(&self) -> usize {
        let mut sink = CountingSink(0);
        self.write_snapshot(&mut sink).expect("counting sink");
        sink.0
    }

    /// Write a versioned binary snapshot sufficient to resume the stream
    /// bit-exactly.
    ///
    /// Layout (version 1, all integers and floats little-endian):
    /// magic `OGPS`, u32 version, u32 input dimension `d`, u32 support size
    /// `s`, u32 `tau`, u64 slices assimilated, u64 inverse rebuilds; f64
    /// `signal_var`, `noise_var`, `prior_mean`, `d` length scales; `s*d`
    /// support coordinates (per-location rows); `mu_a` (s), `sigma_a`,
    /// `sigma_a_inv`, `sigma_ss`, `sigma_ss_inv` (s*s each, column-major);
    /// u32 buffer length `r`, then `r*d` buffer coordinates, `r` buffer
    /// values, `sigma_{S,D'}` and its cached product (s*r each), buffer
    /// predictive means (r), and the buffer predictive-covariance inverse
    /// (r*r).
    pub fn write_snapshot<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        w.write_all(SNAPSHOT_MAGIC)?;
        write_u32(w, SNAPSHOT_VERSION)?;
        write_u32(w, self.h.dim() as u32)?;
        write_u32(w, self.support.len() as u32)?;
        write_u32(w, self.tau as u32)?;
        write_u64(w, self.slices)?;
        write_u64(w, self.rebuilds)?;
        write_f64(w, self.h.signal_var())?;
        write_f64(w, self.h.noise_var())?;
        write_f64(w, self.h.prior_mean())?;
        for l in self.h.length_scales() {
            write_f64(w, *l)?;
        }
        for loc in self.support.locations() {
            for c in loc.coords() {
                write_f64(w, *c)?;
            }
        }
        write_slice(w, self.mu_a.as_slice())?;
        write_slice(w, self.sigma_a.as_slice())?;
        write_slice(w, self.sigma_a_inv.as_slice())?;
        write_slice(w, self.sigma_ss.as_slice())?;
        write_slice(w, self.sigma_ss_inv.as_slice())?;
        write_u32(w, self.recent.len() as u32)?;
        for loc in self.recent.locations() {
            for c in loc.coords() {
                write_f64(w, *c)?;
            }
        }
        write_slice(w, self.recent.values())?;
        write_slice(w, self.recent_cross.as_slice())?;
        write_slice(w, self.recent_w.as_slice())?;
        write_slice(w, self.recent_mu.as_slice())?;
        write_slice(w, self.recent_inv.as_slice())?;
        Ok(())
    }

    /// Restore a state from a snapshot written by
    /// [`write_snapshot`](Self::write_snapshot).
    pub fn read_snapshot<R: Read>(r: &mut R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != SNAPSHOT_MAGIC {
            return Err(Error::Parse {
                line: 0,
                msg: "not an online GP snapshot (bad magic)".into(),
            });
        }
        let version = read_u32(r)?;
        if version != SNAPSHOT_VERSION {
            return Err(Error::Parse {
                line: 0,
                msg: format!("unsupported snapshot version {version}"),
            });
        }
        let d = read_u32(r)? as usize;
        let s = read_u32(r)? as usize;
        let tau = read_u32(r)? as usize;
        let slices = read_u64(r)?;
        let rebuilds = read_u64(r)?;
        let signal_var = read_f64(r)?;
        let noise_var = read_f64(r)?;
        let prior_mean = read_f64(r)?;
        let mut length_scales = vec![0.0; d];
        for l in &mut length_scales {
            *l = read_f64(r)?;
        }
        let h = Hyperparams::new(signal_var, noise_var, length_scales, prior_mean)?;
        let mut support_locs = Vec::with_capacity(s);
        for _ in 0..s {
            let mut coords = vec![0.0; d];
            for c in &mut coords {
                *c = read_f64(r)?;
            }
            support_locs.push(Location::new(coords)?);
        }
        let support = SupportSet::new(support_locs)?;
        let mu_a = DVector::from_vec(read_vec(r, s)?);
        let sigma_a = DMatrix::from_vec(s, s, read_vec(r, s * s)?);
        let sigma_a_inv = DMatrix::from_vec(s, s, read_vec(r, s * s)?);
        let sigma_ss = DMatrix::from_vec(s, s, read_vec(r, s * s)?);
        let sigma_ss_inv = DMatrix::from_vec(s, s, read_vec(r, s * s)?);
        let rlen = read_u32(r)? as usize;
        if rlen > tau {
            return Err(Error::Parse {
                line: 0,
                msg: format!("snapshot buffer length {rlen} exceeds tau {tau}"),
            });
        }
        let mut recent = Dataset::empty();
        let mut recent_locs = Vec::with_capacity(rlen);
        for _ in 0..rlen {
            let mut coords = vec![0.0; d];
            for c in &mut coords {
                *c = read_f64(r)?;
            }
            recent_locs.push(Location::new(coords)?);
        }
        let recent_vals = read_vec(r, rlen)?;
        for (loc, val) in recent_locs.into_iter().zip(recent_vals) {
            recent.push(loc, val);
        }
        let recent_cross = DMatrix::from_vec(s, rlen, read_vec(r, s * rlen)?);
        let recent_w = DMatrix::from_vec(s, rlen, read_vec(r, s * rlen)?);
        let recent_mu = DVector::from_vec(read_vec(r, rlen)?);
        let recent_inv = DMatrix::from_vec(rlen, rlen, read_vec(r, rlen * rlen)?);

        let mut state = OnlineGpState {
            support,
            h,
            tau,
            slices,
            mu_a,
            sigma_a,
            sigma_a_inv,
            sigma_ss,
            sigma_ss_inv,
            a_weights: DVector::zeros(s),
            inv_diff: DMatrix::zeros(s, s),
            recent,
            recent_cross,
            recent_w,
            recent_mu,
            recent_inv,
            rebuilds,
        };
        state.refresh_summary_caches();
        Ok(state)
    }
}

struct CountingSink(usize);

impl Write for CountingSink {
    fn write(&mut self, buf: &[u8]) -> std::io::Result<usize> {
        self.0 += buf.len();
        Ok(buf.len())
    }

    fn flush(&mut self) -> std::io::Result<()> {
        Ok(())
    }
}

fn write_u32<W: Write>(w: &mut W, v: u32) -> std::io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

fn write_u64<W: Write>(w: &mut W, v: u64) -> std::io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

fn write_f64<W: Write>(w: &mut W, v: f64) -> std::io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

fn write_slice<W: Write>(w: &mut W, vs: &[f64]) -> std::io::Result<()> {
    for v in vs {
        write_f64(w, *v)?;
    }
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> std::io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> std::io::Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> std::io::Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

fn read_vec<R: Read>(r: &mut R, n: usize) -> std::io::Result<Vec<f64>> {
    let mut out = vec![0.0; n];
    for v in &mut out {
        *v = read_f64(r)?;
    }
    Ok(out)
}
