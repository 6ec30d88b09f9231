//! Particle-filter localization with a marginalized GP observation model.
//!
//! The belief over the robot pose is a weighted particle set. Each filter
//! step propagates the particles through the odometry motion model, advances
//! a fixed set of simulated sample paths (each carrying its own streaming GP
//! state per field), folds the previous measurement into every path's GP
//! buffer, and reweights the particles by the Monte-Carlo average over paths
//! of the GP predictive density of the current measurement. Resampling is
//! systematic, triggered by the effective sample size.
//!
//! The paths simulate the robot's past trajectory without re-simulating it
//! from scratch: one motion-model draw per path per step, plus a periodic
//! re-anchoring to the retained belief snapshot every `tau` steps to keep
//! the paths from drifting away from the belief. Per-step cost and state
//! size are independent of how many steps have elapsed.

use std::io::Write;

use rand::rngs::StdRng;
use rand::Rng;

use crate::error::{Error, Result};
use crate::gp::gaussian_logpdf;
use crate::motion::{normalize_angle, sample_motion, MotionNoise, OdometryAction, Pose};
use crate::online::OnlineGpState;

/// Weighted particle set over robot poses. Weights are kept normalized.
#[derive(Debug, Clone)]
pub struct Belief {
    particles: Vec<(Pose, f64)>,
}

impl Belief {
    /// Build a belief from particles, normalizing the weights. Weights must
    /// be non-negative, finite, and not all zero.
    pub fn new(particles: Vec<(Pose, f64)>) -> Result<Self> {
        if particles.is_empty() {
            return Err(Error::invalid("belief needs at least one particle"));
        }
        let mut sum = 0.0;
        for (_, w) in &particles {
            if !w.is_finite() || *w < 0.0 {
                return Err(Error::invalid("particle weights must be finite and >= 0"));
            }
            sum += w;
        }
        if sum.is_nan() || sum <= 0.0 {
            return Err(Error::invalid("particle weights must not all be zero"));
        }
        let particles = particles.into_iter().map(|(p, w)| (p, w / sum)).collect();
        Ok(Belief { particles })
    }

    pub fn uniform(poses: Vec<Pose>) -> Result<Self> {
        let n = poses.len();
        Belief::new(poses.into_iter().map(|p| (p, 1.0 / n as f64)).collect())
    }

    /// Particles drawn from a Gaussian around a known start pose.
    pub fn gaussian_init(
        center: &Pose,
        sd_xy: f64,
        sd_heading: f64,
        count: usize,
        rng: &mut StdRng,
    ) -> Result<Self> {
        use rand_distr::{Distribution, Normal};
        if count == 0 {
            return Err(Error::invalid("particle count must be positive"));
        }
        let draw = |rng: &mut StdRng, sd: f64| -> f64 {
            if sd > 0.0 {
                Normal::new(0.0, sd).expect("finite sd").sample(rng)
            } else {
                0.0
            }
        };
        let poses = (0..count)
            .map(|_| {
                Pose::new(
                    center.x + draw(rng, sd_xy),
                    center.y + draw(rng, sd_xy),
                    center.heading() + draw(rng, sd_heading),
                )
            })
            .collect();
        Belief::uniform(poses)
    }

    /// Particles uniform over a bounding box with uniform headings.
    pub fn uniform_box(
        xmin: f64,
        xmax: f64,
        ymin: f64,
        ymax: f64,
        count: usize,
        rng: &mut StdRng,
    ) -> Result<Self> {
        if count == 0 {
            return Err(Error::invalid("particle count must be positive"));
        }
        if !(xmax >= xmin && ymax >= ymin) {
            return Err(Error::invalid("degenerate bounding box"));
        }
        let poses = (0..count)
            .map(|_| {
                Pose::new(
                    xmin + rng.random::<f64>() * (xmax - xmin),
                    ymin + rng.random::<f64>() * (ymax - ymin),
                    normalize_angle(rng.random::<f64>() * std::f64::consts::TAU),
                )
            })
            .collect();
        Belief::uniform(poses)
    }

    pub fn particles(&self) -> &[(Pose, f64)] {
        &self.particles
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    /// Effective sample size `1 / sum(w^2)`.
    pub fn ess(&self) -> f64 {
        1.0 / self.particles.iter().map(|(_, w)| w * w).sum::<f64>()
    }

    /// One pose drawn with probability proportional to particle weight.
    pub fn sample_pose(&self, rng: &mut StdRng) -> Pose {
        let u: f64 = rng.random();
        let mut cum = 0.0;
        for (pose, w) in &self.particles {
            cum += w;
            if u <= cum {
                return *pose;
            }
        }
        self.particles.last().expect("non-empty belief").0
    }

    pub(crate) fn write_snapshot<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        w.write_all(&(self.particles.len() as u32).to_le_bytes())?;
        for (pose, weight) in &self.particles {
            for v in [pose.x, pose.y, pose.heading(), *weight] {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    /// Serialized size of the belief in bytes.
    pub fn snapshot_len(&self) -> usize {
        4 + self.particles.len() * 4 * 8
    }
}

/// Weighted mean location with a weighted circular mean heading.
pub fn estimate_location(belief: &Belief) -> Pose {
    let mut x = 0.0;
    let mut y = 0.0;
    let mut sin = 0.0;
    let mut cos = 0.0;
    for (pose, w) in belief.particles() {
        x += w * pose.x;
        y += w * pose.y;
        sin += w * pose.heading().sin();
        cos += w * pose.heading().cos();
    }
    Pose::new(x, y, sin.atan2(cos))
}

/// Systematic resampling to uniform weights: one uniform draw positions a
/// comb of `n` evenly spaced pointers over the cumulative weights.
pub fn resample(belief: &Belief, rng: &mut StdRng) -> Belief {
    let n = belief.len();
    let step = 1.0 / n as f64;
    let start: f64 = rng.random::<f64>() * step;
    let particles = belief.particles();
    let mut out = Vec::with_capacity(n);
    let mut idx = 0;
    let mut cum = particles[0].1;
    for m in 0..n {
        let u = start + m as f64 * step;
        while u > cum && idx + 1 < n {
            idx += 1;
            cum += particles[idx].1;
        }
        out.push((particles[idx].0, step));
    }
    Belief { particles: out }
}

/// One simulated trajectory hypothesis: its current simulated pose and one
/// streaming GP state per field. The full simulated history is never stored;
/// the GP summaries and buffer stand in for it.
#[derive(Debug, Clone)]
pub struct SamplePath {
    pose: Pose,
    gp: Vec<OnlineGpState>,
}

impl SamplePath {
    pub fn new(pose: Pose, gp: Vec<OnlineGpState>) -> Result<Self> {
        if gp.is_empty() {
            return Err(Error::invalid("sample path needs at least one GP state"));
        }
        let tau = gp[0].tau();
        let phase = gp[0].recent_len();
        for state in &gp {
            if state.tau() != tau || state.recent_len() != phase {
                return Err(Error::invalid(
                    "all GP states of a path must share tau and buffer phase",
                ));
            }
        }
        Ok(SamplePath { pose, gp })
    }

    pub fn pose(&self) -> Pose {
        self.pose
    }

    pub fn gp_states(&self) -> &[OnlineGpState] {
        &self.gp
    }

    pub fn field_count(&self) -> usize {
        self.gp.len()
    }
}

/// The set of sample paths shared by all particles, plus the step-phase
/// bookkeeping the filter needs: the measurement waiting to be attached to
/// the next simulated pose, and the belief snapshot used for re-anchoring.
#[derive(Debug, Clone)]
pub struct SamplePaths {
    paths: Vec<SamplePath>,
    tau: usize,
    steps_completed: u64,
    /// Measurement and action of the previous step, consumed when the paths
    /// are extended to that step's pose at the start of the next step.
    pending: Option<(OdometryAction, Vec<f64>)>,
    anchor: Option<Belief>,
}

impl SamplePaths {
    /// Draw `count` initial path poses from the initial belief; every path
    /// starts with clones of the per-field prototype states.
    pub fn init(
        count: usize,
        prototypes: &[OnlineGpState],
        initial_belief: &Belief,
        rng: &mut StdRng,
    ) -> Result<Self> {
        if count == 0 {
            return Err(Error::invalid("need at least one sample path"));
        }
        if prototypes.is_empty() {
            return Err(Error::invalid("need at least one field prototype"));
        }
        let tau = prototypes[0].tau();
        for p in prototypes {
            if p.tau() != tau || p.recent_len() != 0 || p.slices_assimilated() != 0 {
                return Err(Error::invalid(
                    "prototype states must be fresh with equal tau",
                ));
            }
        }
        let paths = (0..count)
            .map(|_| SamplePath::new(initial_belief.sample_pose(rng), prototypes.to_vec()))
            .collect::<Result<Vec<_>>>()?;
        Ok(SamplePaths {
            paths,
            tau,
            steps_completed: 0,
            pending: None,
            anchor: None,
        })
    }

    pub fn paths(&self) -> &[SamplePath] {
        &self.paths
    }

    pub fn tau(&self) -> usize {
        self.tau
    }

    pub fn field_count(&self) -> usize {
        self.paths[0].field_count()
    }

    pub fn steps_completed(&self) -> u64 {
        self.steps_completed
    }

    /// Buffer length shared by every GP state (the step phase).
    pub fn buffer_len(&self) -> usize {
        self.paths[0].gp[0].recent_len()
    }

    pub(crate) fn write_snapshot<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        w.write_all(&(self.paths.len() as u32).to_le_bytes())?;
        w.write_all(&(self.field_count() as u32).to_le_bytes())?;
        w.write_all(&self.steps_completed.to_le_bytes())?;
        match &self.pending {
            Some((u, z)) => {
                w.write_all(&[1u8])?;
                for v in [u.rot1, u.trans, u.rot2] {
                    w.write_all(&v.to_le_bytes())?;
                }
                for v in z {
                    w.write_all(&v.to_le_bytes())?;
                }
            }
            None => w.write_all(&[0u8])?,
        }
        match &self.anchor {
            Some(b) => {
                w.write_all(&[1u8])?;
                b.write_snapshot(w)?;
            }
            None => w.write_all(&[0u8])?,
        }
        for path in &self.paths {
            for v in [path.pose.x, path.pose.y, path.pose.heading()] {
                w.write_all(&v.to_le_bytes())?;
            }
            for state in &path.gp {
                state.write_snapshot(w)?;
            }
        }
        Ok(())
    }

    /// Serialized size in bytes of the paths plus their bookkeeping.
    pub fn snapshot_len(&self) -> usize {
        struct Counter(usize);
        impl Write for Counter {
            fn write(&mut self, buf: &[u8]) -> std::io::Result<usize> {
                self.0 += buf.len();
                Ok(buf.len())
            }
            fn flush(&mut self) -> std::io::Result<()> {
                Ok(())
            }
        }
        let mut c = Counter(0);
        self.write_snapshot(&mut c).expect("counting sink");
        c.0
    }
}

/// True when step `t` is a re-anchoring step: `t = N*tau + 2` for `N >= 1`.
fn is_reanchor_step(t: u64, tau: usize) -> bool {
    t >= tau as u64 + 2 && (t - 2).is_multiple_of(tau as u64)
}

/// Advance every path one motion step. At steps `t = N*tau + 2` (N >= 1) the
/// path's previous pose is first replaced by a fresh weighted draw from
/// `belief` (the retained snapshot of the belief at step `N*tau`), curbing
/// the drift of the unconstrained path simulation.
pub fn advance_sample_paths(
    paths: &mut SamplePaths,
    u: &OdometryAction,
    belief: &Belief,
    t: u64,
    noise: &MotionNoise,
    rng: &mut StdRng,
) -> Result<()> {
    if belief.is_empty() {
        return Err(Error::invalid("empty belief"));
    }
    let reanchor = is_reanchor_step(t, paths.tau);
    for path in &mut paths.paths {
        if reanchor {
            path.pose = belief.sample_pose(rng);
        }
        path.pose = sample_motion(&path.pose, u, noise, rng);
    }
    Ok(())
}

/// Log of the marginalized observation likelihood: the Monte-Carlo average
/// over sample paths of the product over fields of the GP predictive density
/// of `z` at the query pose. Evaluated in log space per path and combined
/// with log-sum-exp, so the returned log density is finite (the density is
/// strictly positive) for all finite inputs.
pub fn observation_log_likelihood(z: &[f64], pose: &Pose, paths: &[SamplePath]) -> Result<f64> {
    if paths.is_empty() {
        return Err(Error::invalid("need at least one sample path"));
    }
    let fields = paths[0].field_count();
    if z.len() != fields {
        return Err(Error::invalid(format!(
            "measurement has {} fields, paths carry {}",
            z.len(),
            fields
        )));
    }
    let loc = pose.location();
    let mut per_path = Vec::with_capacity(paths.len());
    for path in paths {
        let mut log_density = 0.0;
        for (m, state) in path.gp.iter().enumerate() {
            let g = state.predict_with_recent(&loc)?;
            if g.variance.is_nan() || g.variance <= 0.0 {
                return Err(Error::ill_conditioned(format!(
                    "predictive variance {:.3e} is not positive in field {m}",
                    g.variance
                )));
            }
            log_density += gaussian_logpdf(z[m], &g)?;
        }
        per_path.push(log_density);
    }
    Ok(log_sum_exp(&per_path) - (paths.len() as f64).ln())
}

fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    let sum: f64 = values.iter().map(|v| (v - max).exp()).sum();
    max + sum.ln()
}

/// Particle-filter step configuration.
#[derive(Debug, Clone)]
pub struct FilterConfig {
    pub motion_noise: MotionNoise,
    /// Resample when `ess < resample_frac * particle_count`.
    pub resample_frac: f64,
    /// Diagnostic mode: skip the observation model entirely so the belief is
    /// pure dead reckoning.
    pub constant_likelihood: bool,
}

impl FilterConfig {
    pub fn new(motion_noise: MotionNoise) -> Self {
        FilterConfig {
            motion_noise,
            resample_frac: 0.5,
            constant_likelihood: false,
        }
    }
}

/// One full Bayes-filter step at time `t = paths.steps_completed() + 1`:
/// particle propagation, path advancement (with periodic re-anchoring),
/// attachment of the previous measurement to the paths' GP buffers (flushing
/// full buffers into slice summaries), reweighting by the marginalized
/// observation likelihood of `z`, normalization, and ESS-triggered
/// systematic resampling. `z` is retained and attached at the next step, so
/// the likelihood of `z` is always evaluated against data through `t-1`.
pub fn filter_step(
    belief: &Belief,
    paths: &mut SamplePaths,
    u: &OdometryAction,
    z: &[f64],
    cfg: &FilterConfig,
    rng: &mut StdRng,
) -> Result<Belief> {
    if z.len() != paths.field_count() {
        return Err(Error::invalid(format!(
            "measurement has {} fields, paths carry {}",
            z.len(),
            paths.field_count()
        )));
    }
    let t = paths.steps_completed + 1;

    // Motion update.
    let propagated: Vec<(Pose, f64)> = belief
        .particles()
        .iter()
        .map(|(pose, w)| (sample_motion(pose, u, &cfg.motion_noise, rng), *w))
        .collect();

    // Path simulation and GP assimilation of the held-over measurement: the
    // paths extend to the previous step's pose with that step's action, then
    // attach that step's measurement to the new pose.
    if t >= 2 {
        let (prev_u, prev_z) = paths
            .pending
            .take()
            .expect("a pending step exists after the first step");
        let anchor = paths.anchor.clone().unwrap_or_else(|| belief.clone());
        advance_sample_paths(paths, &prev_u, &anchor, t, &cfg.motion_noise, rng)?;
        for path in &mut paths.paths {
            let loc = path.pose.location();
            for (state, value) in path.gp.iter_mut().zip(&prev_z) {
                state.observe(loc.clone(), *value)?;
            }
        }
    }

    // Measurement update.
    let log_liks = if cfg.constant_likelihood {
        None
    } else {
        let mut lls = Vec::with_capacity(propagated.len());
        for (pose, _) in &propagated {
            lls.push(observation_log_likelihood(z, pose, &paths.paths)?);
        }
        Some(lls)
    };
    let result = reweight(propagated, log_liks.as_deref(), cfg.resample_frac, t, rng)?;

    // Bookkeeping for the next step.
    paths.pending = Some((*u, z.to_vec()));
    if t.is_multiple_of(paths.tau as u64) {
        paths.anchor = Some(result.clone());
    }
    paths.steps_completed = t;
    Ok(result)
}

/// Weight propagated particles by log-likelihoods (max-shifted to avoid
/// underflow), normalize, and resample when the effective sample size drops
/// below the threshold. `log_liks = None` leaves weights untouched. A
/// degenerate update (all weights vanished or non-finite) resets to uniform
/// weights over the propagated particles rather than aborting.
pub(crate) fn reweight(
    propagated: Vec<(Pose, f64)>,
    log_liks: Option<&[f64]>,
    resample_frac: f64,
    t: u64,
    rng: &mut StdRng,
) -> Result<Belief> {
    let weighted = match log_liks {
        None => propagated.clone(),
        Some(lls) => {
            let max_ll = lls.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            if max_ll.is_finite() {
                propagated
                    .iter()
                    .zip(lls)
                    .map(|((pose, w), ll)| (*pose, w * (ll - max_ll).exp()))
                    .collect()
            } else {
                Vec::new()
            }
        }
    };
    let normalized = match Belief::new(weighted) {
        Ok(b) => b,
        Err(_) => {
            eprintln!("warning: degenerate belief at step {t}; resetting to uniform weights");
            Belief::uniform(propagated.iter().map(|(p, _)| *p).collect())?
        }
    };
    Ok(
        if normalized.ess() < resample_frac * normalized.len() as f64 {
            resample(&normalized, rng)
        } else {
            normalized
        },
    )
}
