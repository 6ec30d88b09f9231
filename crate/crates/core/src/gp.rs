//! Gaussian process fundamentals: the squared-exponential kernel with
//! additive noise, exact posterior inference, incremental (block-appended)
//! posterior caches, Gaussian density evaluation, and prior sampling.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::rngs::StdRng;
use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{spd_cholesky, symmetrize};

const LN_2PI: f64 = 1.8378770664093453;

/// A point in the input domain of a field (grid units or meters).
#[derive(Debug, Clone, PartialEq)]
pub struct Location {
    coords: Vec<f64>,
}

impl Location {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::invalid("location must have at least one coordinate"));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid("location coordinates must be finite"));
        }
        Ok(Location { coords })
    }

    /// Convenience constructor for the 2-D case.
    pub fn xy(x: f64, y: f64) -> Self {
        Location::new(vec![x, y]).expect("finite coordinates")
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }
}

/// Kernel and prior-mean parameters of one field's GP.
///
/// The covariance between two locations is
/// `signal_var * exp(-0.5 * sum_i ((x_i - x'_i) / length_scales[i])^2)`
/// plus `noise_var` when the two locations are exactly equal
/// (coordinate-wise), so diagonal Gram entries include the noise.
#[derive(Debug, Clone)]
pub struct Hyperparams {
    signal_var: f64,
    noise_var: f64,
    length_scales: Vec<f64>,
    prior_mean: f64,
}

impl Hyperparams {
    pub fn new(
        signal_var: f64,
        noise_var: f64,
        length_scales: Vec<f64>,
        prior_mean: f64,
    ) -> Result<Self> {
        if !signal_var.is_finite() || signal_var <= 0.0 {
            return Err(Error::invalid("signal_var must be positive"));
        }
        if !noise_var.is_finite() || noise_var < 0.0 {
            return Err(Error::invalid("noise_var must be non-negative"));
        }
        if length_scales.is_empty() {
            return Err(Error::invalid("length_scales must be non-empty"));
        }
        if length_scales.iter().any(|l| !l.is_finite() || *l <= 0.0) {
            return Err(Error::invalid("every length scale must be positive"));
        }
        if !prior_mean.is_finite() {
            return Err(Error::invalid("prior_mean must be finite"));
        }
        Ok(Hyperparams {
            signal_var,
            noise_var,
            length_scales,
            prior_mean,
        })
    }

    pub fn signal_var(&self) -> f64 {
        self.signal_var
    }

    pub fn noise_var(&self) -> f64 {
        self.noise_var
    }

    pub fn length_scales(&self) -> &[f64] {
        &self.length_scales
    }

    pub fn prior_mean(&self) -> f64 {
        self.prior_mean
    }

    pub fn dim(&self) -> usize {
        self.length_scales.len()
    }

    /// Prior variance of a measurement at any location: signal plus noise.
    pub fn prior_var(&self) -> f64 {
        self.signal_var + self.noise_var
    }

    /// Natural variance scale used to anchor jitter in SPD solves.
    pub(crate) fn scale(&self) -> f64 {
        self.prior_var()
    }
}

/// A one-dimensional Gaussian predictive distribution for a measurement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianPredictive {
    pub mean: f64,
    pub variance: f64,
}

/// Observed locations paired with realized measurements.
#[derive(Debug, Clone, Default)]
pub struct Dataset {
    locations: Vec<Location>,
    values: Vec<f64>,
}

impl Dataset {
    pub fn new(locations: Vec<Location>, values: Vec<f64>) -> Result<Self> {
        if locations.len() != values.len() {
            return Err(Error::invalid(format!(
                "dataset has {} locations but {} values",
                locations.len(),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("dataset values must be finite"));
        }
        Ok(Dataset { locations, values })
    }

    pub fn empty() -> Self {
        Dataset::default()
    }

    pub fn push(&mut self, location: Location, value: f64) {
        self.locations.push(location);
        self.values.push(value);
    }

    pub fn len(&self) -> usize {
        self.locations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.locations.is_empty()
    }

    pub fn locations(&self) -> &[Location] {
        &self.locations
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub(crate) fn values_vector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.values)
    }

    /// True if any location appears more than once (exact coordinate match).
    pub(crate) fn has_duplicates(&self) -> bool {
        for i in 0..self.locations.len() {
            for j in (i + 1)..self.locations.len() {
                if self.locations[i] == self.locations[j] {
                    return true;
                }
            }
        }
        false
    }
}

fn check_dim(x: &Location, h: &Hyperparams) -> Result<()> {
    if x.dim() != h.dim() {
        return Err(Error::invalid(format!(
            "location dimension {} does not match hyperparameter dimension {}",
            x.dim(),
            h.dim()
        )));
    }
    Ok(())
}

/// Squared-exponential covariance with additive noise on exact coordinate
/// equality. The Kronecker delta compares coordinates exactly, not within a
/// distance threshold.
pub fn covariance(x: &Location, xp: &Location, h: &Hyperparams) -> Result<f64> {
    check_dim(x, h)?;
    check_dim(xp, h)?;
    Ok(covariance_unchecked(x, xp, h))
}

#[inline]
pub(crate) fn covariance_unchecked(x: &Location, xp: &Location, h: &Hyperparams) -> f64 {
    let mut quad = 0.0;
    for ((a, b), l) in x
        .coords()
        .iter()
        .zip(xp.coords().iter())
        .zip(h.length_scales.iter())
    {
        let d = (a - b) / l;
        quad += d * d;
    }
    let mut cov = h.signal_var * (-0.5 * quad).exp();
    if x == xp {
        cov += h.noise_var;
    }
    cov
}

/// Pairwise covariance matrix between two ordered lists of locations.
pub fn cov_matrix(a: &[Location], b: &[Location], h: &Hyperparams) -> Result<DMatrix<f64>> {
    for x in a.iter().chain(b.iter()) {
        check_dim(x, h)?;
    }
    Ok(DMatrix::from_fn(a.len(), b.len(), |i, j| {
        covariance_unchecked(&a[i], &b[j], h)
    }))
}

/// Covariance column vector between a list of locations and a single query.
pub(crate) fn cov_vector(a: &[Location], x: &Location, h: &Hyperparams) -> DVector<f64> {
    DVector::from_fn(a.len(), |i, _| covariance_unchecked(&a[i], x, h))
}

/// Residuals `z - prior_mean` as a column vector.
pub(crate) fn residual_vector(data: &Dataset, h: &Hyperparams) -> DVector<f64> {
    DVector::from_fn(data.len(), |i, _| data.values()[i] - h.prior_mean)
}

/// Clamp a posterior variance: tiny negative roundoff is truncated to zero,
/// anything below the tolerance is a numerical failure.
pub(crate) fn clamp_variance(var: f64, h: &Hyperparams, what: &str) -> Result<f64> {
    if var < -1e-6 * h.scale() {
        return Err(Error::ill_conditioned(format!(
            "{what}: negative predictive variance {var:.3e}"
        )));
    }
    Ok(var.max(0.0))
}

/// A dense GP fitted to a dataset, reusable across many queries.
#[derive(Debug, Clone)]
pub struct GpModel {
    h: Hyperparams,
    locations: Vec<Location>,
    chol: Option<Cholesky<f64, Dyn>>,
    alpha: DVector<f64>,
}

impl GpModel {
    /// Factor the Gram matrix of `data` once; `predict` then costs one
    /// triangular solve per query.
    pub fn fit(data: &Dataset, h: &Hyperparams) -> Result<Self> {
        if data.is_empty() {
            return Ok(GpModel {
                h: h.clone(),
                locations: Vec::new(),
                chol: None,
                alpha: DVector::zeros(0),
            });
        }
        let gram = cov_matrix(data.locations(), data.locations(), h)?;
        let chol = spd_cholesky(&gram, h.scale(), "GP Gram matrix")?;
        let alpha = chol.solve(&residual_vector(data, h));
        Ok(GpModel {
            h: h.clone(),
            locations: data.locations().to_vec(),
            chol: Some(chol),
            alpha,
        })
    }

    pub fn predict(&self, x: &Location) -> Result<GaussianPredictive> {
        check_dim(x, &self.h)?;
        let prior_var = covariance_unchecked(x, x, &self.h);
        let Some(chol) = &self.chol else {
            return Ok(GaussianPredictive {
                mean: self.h.prior_mean,
                variance: prior_var,
            });
        };
        let k = cov_vector(&self.locations, x, &self.h);
        let mean = self.h.prior_mean + k.dot(&self.alpha);
        let variance = prior_var - k.dot(&chol.solve(&k));
        Ok(GaussianPredictive {
            mean,
            variance: clamp_variance(variance, &self.h, "gp posterior")?,
        })
    }
}

/// Exact GP posterior mean and variance at `x` given `data`.
pub fn gp_posterior(x: &Location, data: &Dataset, h: &Hyperparams) -> Result<GaussianPredictive> {
    GpModel::fit(data, h)?.predict(x)
}

/// One conditioned block of a [`PosteriorCache`].
#[derive(Debug, Clone)]
struct CacheBlock {
    locations: Vec<Location>,
    /// Cholesky factor of the conditional Gram `C_k = Cov(D_k, D_k | D_<k)`.
    chol: Cholesky<f64, Dyn>,
    /// `C_k^{-1} (z_k - mean(D_k | D_<k))`.
    alpha: DVector<f64>,
    /// For each later block `m`, the solved conditional cross-covariance
    /// `C_k^{-1} Cov(D_k, D_m | D_<k)`.
    solved_cross: Vec<DMatrix<f64>>,
}

/// Incrementally extended GP posterior: new observation blocks are folded in
/// by conditioning on everything already cached, so no factorization is ever
/// redone from scratch. Queries reproduce the batch posterior on the union of
/// all blocks.
///
/// Single-writer: one extender at a time, no concurrent readers during an
/// extension.
#[derive(Debug, Clone)]
pub struct PosteriorCache {
    h: Hyperparams,
    blocks: Vec<CacheBlock>,
}

impl PosteriorCache {
    pub fn new(h: &Hyperparams) -> Self {
        PosteriorCache {
            h: h.clone(),
            blocks: Vec::new(),
        }
    }

    pub fn from_dataset(data: &Dataset, h: &Hyperparams) -> Result<Self> {
        let mut cache = PosteriorCache::new(h);
        cache.extend(data)?;
        Ok(cache)
    }

    /// Total number of cached observations.
    pub fn len(&self) -> usize {
        self.blocks.iter().map(|b| b.locations.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    /// Fold a new block of observations into the cache. An empty block leaves
    /// the cache untouched. With zero noise the new locations must be distinct
    /// from each other and from everything cached.
    pub fn extend(&mut self, newdata: &Dataset) -> Result<()> {
        if newdata.is_empty() {
            return Ok(());
        }
        for x in newdata.locations() {
            check_dim(x, &self.h)?;
        }
        if self.h.noise_var == 0.0 {
            if newdata.has_duplicates() {
                return Err(Error::invalid(
                    "duplicate locations in new block with zero noise variance",
                ));
            }
            for b in &self.blocks {
                for x in newdata.locations() {
                    if b.locations.contains(x) {
                        return Err(Error::invalid(
                            "new block repeats a cached location with zero noise variance",
                        ));
                    }
                }
            }
        }

        let locs = newdata.locations();
        let mut gram = cov_matrix(locs, locs, &self.h)?;
        let mut mean = DVector::from_element(locs.len(), self.h.prior_mean);
        // Cross-covariances of every cached block against the new block,
        // conditioned progressively while walking the chain.
        let mut cross: Vec<DMatrix<f64>> = self
            .blocks
            .iter()
            .map(|b| cov_matrix(&b.locations, locs, &self.h))
            .collect::<Result<_>>()?;

        let nblocks = self.blocks.len();
        for k in 0..nblocks {
            let solved = self.blocks[k].chol.solve(&cross[k]);
            mean += cross[k].transpose() * &self.blocks[k].alpha;
            gram -= cross[k].transpose() * &solved;
            for j in (k + 1)..nblocks {
                let correction = self.blocks[k].solved_cross[j - k - 1].transpose() * &cross[k];
                cross[j] -= correction;
            }
            self.blocks[k].solved_cross.push(solved);
        }
        symmetrize(&mut gram);
        let chol = spd_cholesky(&gram, self.h.scale(), "conditional covariance of new block")?;
        let alpha = chol.solve(&(newdata.values_vector() - mean));
        self.blocks.push(CacheBlock {
            locations: locs.to_vec(),
            chol,
            alpha,
            solved_cross: Vec::new(),
        });
        Ok(())
    }

    /// Posterior at `x` given the union of all cached blocks.
    pub fn query(&self, x: &Location) -> Result<GaussianPredictive> {
        check_dim(x, &self.h)?;
        let mut mean = self.h.prior_mean;
        let mut var = covariance_unchecked(x, x, &self.h);
        let mut rows: Vec<DVector<f64>> = self
            .blocks
            .iter()
            .map(|b| cov_vector(&b.locations, x, &self.h))
            .collect();
        for k in 0..self.blocks.len() {
            let block = &self.blocks[k];
            let solved = block.chol.solve(&rows[k]);
            mean += rows[k].dot(&block.alpha);
            var -= rows[k].dot(&solved);
            for j in (k + 1)..self.blocks.len() {
                let correction = block.solved_cross[j - k - 1].transpose() * &rows[k];
                rows[j] -= correction;
            }
        }
        Ok(GaussianPredictive {
            mean,
            variance: clamp_variance(var, &self.h, "incremental posterior")?,
        })
    }
}

/// Log-density of `z` under a Gaussian predictive distribution.
pub fn gaussian_logpdf(z: f64, g: &GaussianPredictive) -> Result<f64> {
    if g.variance.is_nan() || g.variance <= 0.0 {
        return Err(Error::invalid(format!(
            "gaussian_logpdf requires positive variance, got {:.3e}",
            g.variance
        )));
    }
    let d = z - g.mean;
    Ok(-0.5 * (LN_2PI + g.variance.ln()) - 0.5 * d * d / g.variance)
}

/// One joint draw from the GP prior at the given locations. Deterministic for
/// a fixed seed.
pub fn sample_gp_prior(locations: &[Location], h: &Hyperparams, seed: u64) -> Result<Vec<f64>> {
    if locations.is_empty() {
        return Ok(Vec::new());
    }
    let gram = cov_matrix(locations, locations, h)?;
    let chol = spd_cholesky(&gram, h.scale(), "prior covariance")?;
    let mut rng = StdRng::seed_from_u64(seed);
    let eps = DVector::from_fn(locations.len(), |_, _| StandardNormal.sample(&mut rng));
    let draw = chol.l() * eps;
    Ok(draw.iter().map(|v| v + h.prior_mean).collect())
}
