//! Offline sparse GP approximations: subset-of-data, the partially
//! independent training conditional (PITC), and its fully independent
//! special case (FITC, singleton blocks).
//!
//! PITC is computed through the support-space identity — accumulating
//! per-block summaries `U_n C_n^{-1} U_n^T` into a `|S| x |S|` system —
//! rather than by inverting the full `|D| x |D|` approximated covariance.
//! Both routes agree (the dense route lives in the test oracles).

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};
use crate::gp::{
    clamp_variance, cov_matrix, cov_vector, covariance_unchecked, gp_posterior, residual_vector,
    Dataset, GaussianPredictive, Hyperparams, Location,
};
use crate::linalg::{spd_cholesky, symmetrize};

/// The support (inducing) set channeling all information in the sparse
/// approximations. Its locations do not have to be observed.
#[derive(Debug, Clone)]
pub struct SupportSet {
    locations: Vec<Location>,
}

impl SupportSet {
    pub fn new(locations: Vec<Location>) -> Result<Self> {
        if locations.is_empty() {
            return Err(Error::invalid("support set must be non-empty"));
        }
        for i in 0..locations.len() {
            for j in (i + 1)..locations.len() {
                if locations[i] == locations[j] {
                    return Err(Error::invalid("support set locations must be distinct"));
                }
            }
        }
        Ok(SupportSet { locations })
    }

    pub fn locations(&self) -> &[Location] {
        &self.locations
    }

    pub fn len(&self) -> usize {
        self.locations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.locations.is_empty()
    }
}

/// A dataset partitioned into ordered blocks `D_1, ..., D_N`; the blocks are
/// conditionally independent given the support set under PITC.
#[derive(Debug, Clone)]
pub struct BlockedDataset {
    blocks: Vec<Dataset>,
}

impl BlockedDataset {
    pub fn new(blocks: Vec<Dataset>) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::invalid(
                "blocked dataset must have at least one block",
            ));
        }
        if blocks.iter().any(|b| b.is_empty()) {
            return Err(Error::invalid("blocks must be non-empty"));
        }
        let all: Vec<&Location> = blocks.iter().flat_map(|b| b.locations()).collect();
        for i in 0..all.len() {
            for j in (i + 1)..all.len() {
                if all[i] == all[j] {
                    return Err(Error::invalid(
                        "locations must be distinct across all blocks",
                    ));
                }
            }
        }
        Ok(BlockedDataset { blocks })
    }

    /// Singleton blocks, one observation each (the FITC partition).
    pub fn singletons(data: &Dataset) -> Result<Self> {
        let blocks = data
            .locations()
            .iter()
            .zip(data.values())
            .map(|(x, z)| Dataset::new(vec![x.clone()], vec![*z]))
            .collect::<Result<Vec<_>>>()?;
        BlockedDataset::new(blocks)
    }

    pub fn blocks(&self) -> &[Dataset] {
        &self.blocks
    }

    pub fn total_len(&self) -> usize {
        self.blocks.iter().map(Dataset::len).sum()
    }
}

/// Assimilated support-space form of a PITC posterior:
/// `sigma_a = Sigma_SS + sum_n U_n C_n^{-1} U_n^T` and
/// `mu_a = sum_n U_n C_n^{-1} (z_n - mu_n)`, with `U_n = Sigma_{S,D_n}` and
/// `C_n = Sigma_{D_n,D_n|S}`. Queries then cost one `|S|`-sized solve.
#[derive(Debug)]
pub(crate) struct SupportSpaceModel {
    support: Vec<Location>,
    h: Hyperparams,
    chol_ss: Cholesky<f64, Dyn>,
    mu_a: DVector<f64>,
    chol_a: Cholesky<f64, Dyn>,
}

impl SupportSpaceModel {
    pub(crate) fn build(data: &BlockedDataset, s: &SupportSet, h: &Hyperparams) -> Result<Self> {
        let support = s.locations().to_vec();
        let sigma_ss = cov_matrix(&support, &support, h)?;
        let chol_ss = spd_cholesky(&sigma_ss, h.scale(), "support Gram matrix")?;

        let m = support.len();
        let mut sigma_a = sigma_ss.clone();
        let mut mu_a = DVector::zeros(m);
        for block in data.blocks() {
            let (mu_s, sigma_s) = slice_summary_terms(block, &support, &chol_ss, h)?;
            mu_a += mu_s;
            sigma_a += sigma_s;
        }
        symmetrize(&mut sigma_a);
        let chol_a = spd_cholesky(&sigma_a, h.scale(), "assimilated support matrix")?;
        Ok(SupportSpaceModel {
            support,
            h: h.clone(),
            chol_ss,
            mu_a,
            chol_a,
        })
    }

    pub(crate) fn predict(&self, x: &Location) -> Result<GaussianPredictive> {
        let k = cov_vector(&self.support, x, &self.h);
        let mean = self.h.prior_mean() + k.dot(&self.chol_a.solve(&self.mu_a));
        let prior_var = covariance_unchecked(x, x, &self.h);
        let variance = prior_var - k.dot(&self.chol_ss.solve(&k)) + k.dot(&self.chol_a.solve(&k));
        Ok(GaussianPredictive {
            mean,
            variance: clamp_variance(variance, &self.h, "pitc posterior")?,
        })
    }
}

/// Summary of one block through the support set:
/// `(U C^{-1} (z - mu), U C^{-1} U^T)`.
pub(crate) fn slice_summary_terms(
    block: &Dataset,
    support: &[Location],
    chol_ss: &Cholesky<f64, Dyn>,
    h: &Hyperparams,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let u = cov_matrix(support, block.locations(), h)?;
    let gram = cov_matrix(block.locations(), block.locations(), h)?;
    let mut cond = gram - u.transpose() * chol_ss.solve(&u);
    symmetrize(&mut cond);
    let chol_cond = spd_cholesky(&cond, h.scale(), "block conditional covariance")?;
    let mu_s = &u * chol_cond.solve(&residual_vector(block, h));
    let mut sigma_s = &u * chol_cond.solve(&u.transpose());
    symmetrize(&mut sigma_s);
    Ok((mu_s, sigma_s))
}

/// Subset-of-data posterior: the exact GP posterior conditioned only on
/// `subset`.
pub fn sod_posterior(
    x: &Location,
    subset: &Dataset,
    h: &Hyperparams,
) -> Result<GaussianPredictive> {
    gp_posterior(x, subset, h)
}

/// PITC posterior at `x` given blocked data and a support set.
pub fn pitc_posterior(
    x: &Location,
    data: &BlockedDataset,
    s: &SupportSet,
    h: &Hyperparams,
) -> Result<GaussianPredictive> {
    SupportSpaceModel::build(data, s, h)?.predict(x)
}

/// FITC posterior: PITC with one singleton block per observation. An empty
/// dataset yields the prior.
pub fn fitc_posterior(
    x: &Location,
    data: &Dataset,
    s: &SupportSet,
    h: &Hyperparams,
) -> Result<GaussianPredictive> {
    if data.is_empty() {
        return Ok(GaussianPredictive {
            mean: h.prior_mean(),
            variance: covariance_unchecked(x, x, h),
        });
    }
    pitc_posterior(x, &BlockedDataset::singletons(data)?, s, h)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::gp::covariance;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn h2(signal_var: f64, noise_var: f64, ls: [f64; 2], mean: f64) -> Hyperparams {
        Hyperparams::new(signal_var, noise_var, ls.to_vec(), mean).unwrap()
    }

    fn random_location(rng: &mut StdRng, span: f64) -> Location {
        Location::xy(rng.random::<f64>() * span, rng.random::<f64>() * span)
    }

    fn random_instance(
        rng: &mut StdRng,
        n: usize,
        h: &Hyperparams,
        span: f64,
    ) -> (Vec<Location>, Vec<f64>) {
        let locs: Vec<_> = (0..n).map(|_| random_location(rng, span)).collect();
        let vals: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
        let _ = h;
        (locs, vals)
    }

    /// Dense evaluation of the PITC equations: forms the full `|D| x |D|`
    /// approximated covariance `Gamma_DD + Lambda` and inverts it directly.
    /// Kept independent of the support-space implementation path.
    pub(crate) fn dense_pitc_oracle(
        x: &Location,
        data: &BlockedDataset,
        s: &SupportSet,
        h: &Hyperparams,
    ) -> GaussianPredictive {
        let sup = s.locations();
        let all: Vec<Location> = data
            .blocks()
            .iter()
            .flat_map(|b| b.locations().iter().cloned())
            .collect();
        let vals: Vec<f64> = data
            .blocks()
            .iter()
            .flat_map(|b| b.values().iter().cloned())
            .collect();
        let n = all.len();
        let ss_inv = cov_matrix(sup, sup, h).unwrap().try_inverse().unwrap();
        let s_d = cov_matrix(sup, &all, h).unwrap();
        let s_x = cov_vector(sup, x, h);
        let gamma_dd = s_d.transpose() * &ss_inv * &s_d;
        let gamma_xd = (s_x.transpose() * &ss_inv * &s_d).transpose();

        // Lambda: block-diagonal pieces of Sigma_DD|S.
        let mut lambda = DMatrix::zeros(n, n);
        let mut off = 0;
        for block in data.blocks() {
            let bl = block.locations();
            let u = cov_matrix(sup, bl, h).unwrap();
            let cond = cov_matrix(bl, bl, h).unwrap() - u.transpose() * &ss_inv * &u;
            for i in 0..bl.len() {
                for j in 0..bl.len() {
                    lambda[(off + i, off + j)] = cond[(i, j)];
                }
            }
            off += bl.len();
        }
        let mut approx = gamma_dd + lambda;
        // The blocks can be numerically singular when S covers D; nudge as a
        // plain dense oracle would.
        for i in 0..n {
            approx[(i, i)] += 1e-12 * h.prior_var();
        }
        let inv = approx.try_inverse().unwrap();
        let resid = DVector::from_fn(n, |i, _| vals[i] - h.prior_mean());
        let mean = h.prior_mean() + (gamma_xd.transpose() * &inv * &resid)[(0, 0)];
        let prior = covariance(x, x, h).unwrap();
        let variance = prior - (gamma_xd.transpose() * &inv * &gamma_xd)[(0, 0)];
        GaussianPredictive { mean, variance }
    }

    #[test]
    fn sod_on_full_dataset_equals_posterior_exactly() {
        let h = h2(1.0, 0.1, [1.0, 1.0], 0.2);
        let mut rng = StdRng::seed_from_u64(1);
        let (locs, vals) = random_instance(&mut rng, 8, &h, 5.0);
        let data = Dataset::new(locs, vals).unwrap();
        let x = random_location(&mut rng, 5.0);
        let a = sod_posterior(&x, &data, &h).unwrap();
        let b = gp_posterior(&x, &data, &h).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn sod_on_empty_subset_is_prior() {
        let h = h2(1.0, 0.3, [1.0, 1.0], -0.4);
        let g = sod_posterior(&Location::xy(1.0, 1.0), &Dataset::empty(), &h).unwrap();
        assert_eq!(g.mean, -0.4);
        assert_eq!(g.variance, 1.3);
    }

    #[test]
    fn sod_on_suffix_matches_dense_oracle() {
        let h = h2(1.0, 0.05, [1.2, 0.9], 0.0);
        let mut rng = StdRng::seed_from_u64(2);
        let (locs, vals) = random_instance(&mut rng, 40, &h, 10.0);
        let subset = Dataset::new(locs[30..].to_vec(), vals[30..].to_vec()).unwrap();
        let x = random_location(&mut rng, 10.0);
        let g = sod_posterior(&x, &subset, &h).unwrap();

        let n = 10;
        let gram = DMatrix::from_fn(n, n, |i, j| {
            covariance(&locs[30 + i], &locs[30 + j], &h).unwrap()
        });
        let inv = gram.try_inverse().unwrap();
        let k = DVector::from_fn(n, |i, _| covariance(&locs[30 + i], &x, &h).unwrap());
        let resid = DVector::from_fn(n, |i, _| vals[30 + i]);
        let mean = k.dot(&(&inv * &resid));
        let var = covariance(&x, &x, &h).unwrap() - k.dot(&(&inv * &k));
        assert!((g.mean - mean).abs() < 1e-10);
        assert!((g.variance - var).abs() < 1e-10);
    }

    #[test]
    fn pitc_with_support_equal_to_data_collapses_to_full_gp() {
        let h = h2(1.0, 0.2, [1.0, 1.4], 0.1);
        let mut rng = StdRng::seed_from_u64(3);
        for trial in 0..20 {
            let (locs, vals) = random_instance(&mut rng, 8, &h, 6.0);
            let data = Dataset::new(locs.clone(), vals.clone()).unwrap();
            let blocked = BlockedDataset::new(vec![
                Dataset::new(locs[..4].to_vec(), vals[..4].to_vec()).unwrap(),
                Dataset::new(locs[4..].to_vec(), vals[4..].to_vec()).unwrap(),
            ])
            .unwrap();
            let s = SupportSet::new(locs.clone()).unwrap();
            let x = random_location(&mut rng, 6.0);
            let pitc = pitc_posterior(&x, &blocked, &s, &h).unwrap();
            let full = gp_posterior(&x, &data, &h).unwrap();
            let mtol = 1e-7 * full.mean.abs().max(1.0);
            let vtol = 1e-7 * full.variance.abs().max(1.0);
            assert!((pitc.mean - full.mean).abs() <= mtol, "trial {trial}");
            assert!(
                (pitc.variance - full.variance).abs() <= vtol,
                "trial {trial}"
            );
        }
    }

    #[test]
    fn pitc_with_singleton_blocks_equals_fitc_exactly() {
        let h = h2(1.0, 0.1, [1.0, 1.0], 0.0);
        let mut rng = StdRng::seed_from_u64(4);
        let (locs, vals) = random_instance(&mut rng, 6, &h, 5.0);
        let data = Dataset::new(locs.clone(), vals.clone()).unwrap();
        let s = SupportSet::new((0..3).map(|_| random_location(&mut rng, 5.0)).collect()).unwrap();
        let x = random_location(&mut rng, 5.0);
        let fitc = fitc_posterior(&x, &data, &s, &h).unwrap();
        let pitc = pitc_posterior(&x, &BlockedDataset::singletons(&data).unwrap(), &s, &h).unwrap();
        assert!((fitc.mean - pitc.mean).abs() <= 1e-12);
        assert!((fitc.variance - pitc.variance).abs() <= 1e-12);
    }

    #[test]
    fn fitc_on_single_point_equals_singleton_pitc() {
        let h = h2(1.0, 0.1, [1.0, 1.0], 0.5);
        let data = Dataset::new(vec![Location::xy(1.0, 2.0)], vec![1.5]).unwrap();
        let s = SupportSet::new(vec![Location::xy(0.0, 0.0), Location::xy(2.0, 2.0)]).unwrap();
        let x = Location::xy(0.7, 0.7);
        let fitc = fitc_posterior(&x, &data, &s, &h).unwrap();
        let pitc = pitc_posterior(&x, &BlockedDataset::singletons(&data).unwrap(), &s, &h).unwrap();
        assert_eq!(fitc, pitc);
    }

    #[test]
    fn fitc_on_empty_data_is_prior() {
        let h = h2(1.0, 0.25, [1.0, 1.0], 0.9);
        let s = SupportSet::new(vec![Location::xy(0.0, 0.0)]).unwrap();
        let g = fitc_posterior(&Location::xy(1.0, 1.0), &Dataset::empty(), &s, &h).unwrap();
        assert_eq!(g.mean, 0.9);
        assert_eq!(g.variance, 1.25);
    }

    #[test]
    fn pitc_matches_dense_equation_oracle() {
        let h = h2(1.2, 0.15, [1.1, 0.8], 0.3);
        let mut rng = StdRng::seed_from_u64(5);
        let (locs, vals) = random_instance(&mut rng, 10, &h, 7.0);
        let blocked = BlockedDataset::new(vec![
            Dataset::new(locs[..5].to_vec(), vals[..5].to_vec()).unwrap(),
            Dataset::new(locs[5..].to_vec(), vals[5..].to_vec()).unwrap(),
        ])
        .unwrap();
        let s = SupportSet::new((0..3).map(|_| random_location(&mut rng, 7.0)).collect()).unwrap();
        for _ in 0..5 {
            let x = random_location(&mut rng, 7.0);
            let got = pitc_posterior(&x, &blocked, &s, &h).unwrap();
            let oracle = dense_pitc_oracle(&x, &blocked, &s, &h);
            assert!((got.mean - oracle.mean).abs() <= 1e-8 * oracle.mean.abs().max(1.0));
            assert!(
                (got.variance - oracle.variance).abs() <= 1e-8 * oracle.variance.abs().max(1.0)
            );
        }
    }

    #[test]
    fn fitc_matches_dense_diagonal_lambda_oracle() {
        let h = h2(1.0, 0.1, [1.0, 1.3], -0.2);
        let mut rng = StdRng::seed_from_u64(6);
        let (locs, vals) = random_instance(&mut rng, 8, &h, 6.0);
        let data = Dataset::new(locs, vals).unwrap();
        let s = SupportSet::new((0..4).map(|_| random_location(&mut rng, 6.0)).collect()).unwrap();
        let x = random_location(&mut rng, 6.0);
        let got = fitc_posterior(&x, &data, &s, &h).unwrap();
        let oracle = dense_pitc_oracle(&x, &BlockedDataset::singletons(&data).unwrap(), &s, &h);
        assert!((got.mean - oracle.mean).abs() <= 1e-8 * oracle.mean.abs().max(1.0));
        assert!((got.variance - oracle.variance).abs() <= 1e-8 * oracle.variance.abs().max(1.0));
    }

    #[test]
    fn pitc_variance_never_exceeds_prior() {
        let h = h2(1.0, 0.1, [1.0, 1.0], 0.0);
        let mut rng = StdRng::seed_from_u64(7);
        for _ in 0..20 {
            let (locs, vals) = random_instance(&mut rng, 9, &h, 8.0);
            let blocked = BlockedDataset::new(vec![
                Dataset::new(locs[..3].to_vec(), vals[..3].to_vec()).unwrap(),
                Dataset::new(locs[3..6].to_vec(), vals[3..6].to_vec()).unwrap(),
                Dataset::new(locs[6..].to_vec(), vals[6..].to_vec()).unwrap(),
            ])
            .unwrap();
            let s =
                SupportSet::new((0..4).map(|_| random_location(&mut rng, 8.0)).collect()).unwrap();
            let x = random_location(&mut rng, 8.0);
            let g = pitc_posterior(&x, &blocked, &s, &h).unwrap();
            assert!(g.variance <= covariance(&x, &x, &h).unwrap() + 1e-10);
            assert!(g.variance >= 0.0);
        }
    }

    #[test]
    fn pitc_is_invariant_to_block_order() {
        let h = h2(1.0, 0.12, [1.0, 1.0], 0.0);
        let mut rng = StdRng::seed_from_u64(8);
        let (locs, vals) = random_instance(&mut rng, 9, &h, 6.0);
        let b1 = Dataset::new(locs[..3].to_vec(), vals[..3].to_vec()).unwrap();
        let b2 = Dataset::new(locs[3..6].to_vec(), vals[3..6].to_vec()).unwrap();
        let b3 = Dataset::new(locs[6..].to_vec(), vals[6..].to_vec()).unwrap();
        let s = SupportSet::new((0..4).map(|_| random_location(&mut rng, 6.0)).collect()).unwrap();
        let orders = [
            vec![b1.clone(), b2.clone(), b3.clone()],
            vec![b3.clone(), b1.clone(), b2.clone()],
            vec![b2, b3, b1],
        ];
        let x = random_location(&mut rng, 6.0);
        let results: Vec<_> = orders
            .into_iter()
            .map(|blocks| {
                pitc_posterior(&x, &BlockedDataset::new(blocks).unwrap(), &s, &h).unwrap()
            })
            .collect();
        for g in &results[1..] {
            assert!((g.mean - results[0].mean).abs() <= 1e-10);
            assert!((g.variance - results[0].variance).abs() <= 1e-10);
        }
    }

    #[test]
    fn blocked_dataset_rejects_duplicates_across_blocks() {
        let x = Location::xy(1.0, 1.0);
        let b1 = Dataset::new(vec![x.clone()], vec![0.1]).unwrap();
        let b2 = Dataset::new(vec![x], vec![0.2]).unwrap();
        assert!(matches!(
            BlockedDataset::new(vec![b1, b2]),
            Err(Error::InvalidArgument(_))
        ));
    }
}
