//! Robot pose, odometry actions, and the rotation-translation-rotation
//! odometry motion model with sampled noise.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::gp::Location;

/// Wrap an angle into `(-pi, pi]`.
pub fn normalize_angle(theta: f64) -> f64 {
    use std::f64::consts::PI;
    PI - (PI - theta).rem_euclid(2.0 * PI)
}

/// Robot pose: 2-D location plus heading in `(-pi, pi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    heading: f64,
}

impl Pose {
    pub fn new(x: f64, y: f64, heading: f64) -> Self {
        Pose {
            x,
            y,
            heading: normalize_angle(heading),
        }
    }

    pub fn heading(&self) -> f64 {
        self.heading
    }

    pub fn location(&self) -> Location {
        Location::xy(self.x, self.y)
    }

    pub fn distance_to(&self, other: &Pose) -> f64 {
        ((self.x - other.x).powi(2) + (self.y - other.y).powi(2)).sqrt()
    }
}

/// One odometry reading decomposed as initial rotation, translation, final
/// rotation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdometryAction {
    pub rot1: f64,
    pub trans: f64,
    pub rot2: f64,
}

impl OdometryAction {
    pub fn new(rot1: f64, trans: f64, rot2: f64) -> Result<Self> {
        if !(rot1.is_finite() && trans.is_finite() && rot2.is_finite()) {
            return Err(Error::invalid("odometry action must be finite"));
        }
        Ok(OdometryAction { rot1, trans, rot2 })
    }

    pub fn identity() -> Self {
        OdometryAction {
            rot1: 0.0,
            trans: 0.0,
            rot2: 0.0,
        }
    }
}

/// Odometry noise coefficients. The sampled noise variances are
/// `alpha1*rot^2 + alpha2*trans^2` for the rotations and
/// `alpha3*trans^2 + alpha4*(rot1^2 + rot2^2)` for the translation
/// (the alphas scale variances, not standard deviations).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotionNoise {
    pub alpha1: f64,
    pub alpha2: f64,
    pub alpha3: f64,
    pub alpha4: f64,
}

impl MotionNoise {
    pub fn new(alpha1: f64, alpha2: f64, alpha3: f64, alpha4: f64) -> Result<Self> {
        for a in [alpha1, alpha2, alpha3, alpha4] {
            if !a.is_finite() || a < 0.0 {
                return Err(Error::invalid("motion noise coefficients must be >= 0"));
            }
        }
        Ok(MotionNoise {
            alpha1,
            alpha2,
            alpha3,
            alpha4,
        })
    }

    pub fn zero() -> Self {
        MotionNoise {
            alpha1: 0.0,
            alpha2: 0.0,
            alpha3: 0.0,
            alpha4: 0.0,
        }
    }
}

fn sample_centered<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> f64 {
    if variance > 0.0 {
        Normal::new(0.0, variance.sqrt())
            .expect("finite standard deviation")
            .sample(rng)
    } else {
        0.0
    }
}

/// Apply an action with exact geometry (zero-noise dead reckoning).
pub fn apply_action(prev: &Pose, u: &OdometryAction) -> Pose {
    let theta = prev.heading + u.rot1;
    Pose::new(
        prev.x + u.trans * theta.cos(),
        prev.y + u.trans * theta.sin(),
        theta + u.rot2,
    )
}

/// Draw a pose from the odometry motion model `p(x_t | u_t, x_{t-1})`:
/// rotate, translate, rotate, each component perturbed by zero-mean Gaussian
/// noise with variance proportional to the motion magnitudes.
pub fn sample_motion<R: Rng + ?Sized>(
    prev: &Pose,
    u: &OdometryAction,
    noise: &MotionNoise,
    rng: &mut R,
) -> Pose {
    let r1_var = noise.alpha1 * u.rot1 * u.rot1 + noise.alpha2 * u.trans * u.trans;
    let t_var =
        noise.alpha3 * u.trans * u.trans + noise.alpha4 * (u.rot1 * u.rot1 + u.rot2 * u.rot2);
    let r2_var = noise.alpha1 * u.rot2 * u.rot2 + noise.alpha2 * u.trans * u.trans;

    let rot1 = u.rot1 - sample_centered(rng, r1_var);
    let trans = u.trans - sample_centered(rng, t_var);
    let rot2 = u.rot2 - sample_centered(rng, r2_var);

    apply_action(prev, &OdometryAction { rot1, trans, rot2 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::SeedableRng;
    use std::f64::consts::PI;

    #[test]
    fn angles_normalize_into_half_open_interval() {
        assert_eq!(normalize_angle(PI), PI);
        assert_eq!(normalize_angle(-PI), PI);
        assert!((normalize_angle(3.0 * PI) - PI).abs() < 1e-12);
        assert!((normalize_angle(-0.5) + 0.5).abs() < 1e-12);
        assert!((normalize_angle(2.0 * PI + 0.25) - 0.25).abs() < 1e-12);
    }

    #[test]
    fn zero_noise_motion_is_exact_geometry() {
        let prev = Pose::new(1.0, 2.0, PI / 6.0);
        let u = OdometryAction::new(PI / 3.0, 2.0, -PI / 4.0).unwrap();
        let mut rng = StdRng::seed_from_u64(0);
        let got = sample_motion(&prev, &u, &MotionNoise::zero(), &mut rng);
        let theta = PI / 6.0 + PI / 3.0;
        assert!((got.x - (1.0 + 2.0 * theta.cos())).abs() < 1e-12);
        assert!((got.y - (2.0 + 2.0 * theta.sin())).abs() < 1e-12);
        assert!((got.heading() - normalize_angle(theta - PI / 4.0)).abs() < 1e-12);
    }

    #[test]
    fn identity_action_with_zero_noise_is_a_fixed_point() {
        let prev = Pose::new(-3.0, 0.5, 1.1);
        let mut rng = StdRng::seed_from_u64(1);
        let got = sample_motion(
            &prev,
            &OdometryAction::identity(),
            &MotionNoise::zero(),
            &mut rng,
        );
        assert_eq!(got, prev);
    }

    #[test]
    fn sampled_mean_pose_matches_dead_reckoning() {
        // Small noise keeps the cosine bias of the heading noise far below
        // the Monte Carlo standard error.
        let prev = Pose::new(0.0, 0.0, 0.4);
        let u = OdometryAction::new(0.3, 2.0, 0.2).unwrap();
        let noise = MotionNoise::new(1e-5, 1e-5, 1e-5, 1e-5).unwrap();
        let mut rng = StdRng::seed_from_u64(7);
        let n = 10_000;
        let samples: Vec<Pose> = (0..n)
            .map(|_| sample_motion(&prev, &u, &noise, &mut rng))
            .collect();
        let exact = apply_action(&prev, &u);
        for (label, values, target) in [
            (
                "x",
                samples.iter().map(|p| p.x).collect::<Vec<_>>(),
                exact.x,
            ),
            (
                "y",
                samples.iter().map(|p| p.y).collect::<Vec<_>>(),
                exact.y,
            ),
            (
                "heading",
                samples.iter().map(|p| p.heading()).collect::<Vec<_>>(),
                exact.heading(),
            ),
        ] {
            let mean = values.iter().sum::<f64>() / n as f64;
            let var =
                values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n as f64 - 1.0);
            let se = (var / n as f64).sqrt();
            assert!(
                (mean - target).abs() <= 3.0 * se.max(1e-12),
                "{label}: mean {mean} target {target} se {se}"
            );
        }
    }

    #[test]
    fn sampling_is_deterministic_per_seed() {
        let prev = Pose::new(0.0, 0.0, 0.0);
        let u = OdometryAction::new(0.1, 1.0, -0.1).unwrap();
        let noise = MotionNoise::new(0.02, 0.02, 0.02, 0.02).unwrap();
        let a = sample_motion(&prev, &u, &noise, &mut StdRng::seed_from_u64(5));
        let b = sample_motion(&prev, &u, &noise, &mut StdRng::seed_from_u64(5));
        assert_eq!(a, b);
    }
}
