//! Trajectory generation for the simulation harness: lawnmower sweeps,
//! bounded random walks, and explicit waypoint routes. Every trajectory is
//! an action sequence whose zero-noise dead reckoning reproduces the stored
//! true poses exactly.

use rand::rngs::StdRng;
use rand::SeedableRng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::motion::{apply_action, normalize_angle, OdometryAction, Pose};

/// How the simulated robot moves through the field.
#[derive(Debug, Clone)]
pub enum TrajectorySpec {
    /// Serpentine sweep across the field bounds, `margin` inside the edges,
    /// moving in steps of `step_len` with sweep lines `row_spacing` apart.
    Lawnmower {
        margin: f64,
        step_len: f64,
        row_spacing: f64,
    },
    /// Random heading perturbations with reflection at the (margin-inset)
    /// bounds.
    RandomWalk {
        margin: f64,
        step_len: f64,
        turn_sd: f64,
        steps: usize,
    },
    /// Visit the waypoints in order, in segments of at most `step_len`.
    Waypoints {
        points: Vec<(f64, f64)>,
        step_len: f64,
    },
}

/// A generated route: the start pose and, per step, the action and the true
/// pose it leads to.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub start: Pose,
    pub steps: Vec<(OdometryAction, Pose)>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn truncated(mut self, max_steps: usize) -> Self {
        self.steps.truncate(max_steps);
        self
    }
}

fn in_bounds(p: &Pose, bounds: (f64, f64, f64, f64), slack: f64) -> bool {
    let (xmin, xmax, ymin, ymax) = bounds;
    p.x >= xmin - slack && p.x <= xmax + slack && p.y >= ymin - slack && p.y <= ymax + slack
}

/// Generate the action/pose sequence for `spec` within `bounds`
/// (`xmin, xmax, ymin, ymax`). Deterministic per seed.
pub fn generate_trajectory(
    spec: &TrajectorySpec,
    bounds: (f64, f64, f64, f64),
    seed: u64,
) -> Result<Trajectory> {
    let (xmin, xmax, ymin, ymax) = bounds;
    if !(xmax >= xmin && ymax >= ymin) {
        return Err(Error::invalid("degenerate field bounds"));
    }
    let traj = match spec {
        TrajectorySpec::Lawnmower {
            margin,
            step_len,
            row_spacing,
        } => {
            if !(*step_len > 0.0 && *row_spacing > 0.0) {
                return Err(Error::invalid(
                    "step length and row spacing must be positive",
                ));
            }
            let x0 = xmin + margin;
            let x1 = xmax - margin;
            let y0 = ymin + margin;
            let y1 = ymax - margin;
            if x1 <= x0 || y1 <= y0 {
                return Err(Error::invalid("margin leaves no sweep area"));
            }
            let mut points = Vec::new();
            let mut y = y0;
            let mut leftwards = false;
            while y <= y1 + 1e-9 {
                if leftwards {
                    points.push((x1, y));
                    points.push((x0, y));
                } else {
                    points.push((x0, y));
                    points.push((x1, y));
                }
                leftwards = !leftwards;
                y += row_spacing;
            }
            waypoint_route(&points, *step_len)?
        }
        TrajectorySpec::RandomWalk {
            margin,
            step_len,
            turn_sd,
            steps,
        } => {
            if *step_len <= 0.0 || step_len.is_nan() {
                return Err(Error::invalid("step length must be positive"));
            }
            let x0 = xmin + margin;
            let x1 = xmax - margin;
            let y0 = ymin + margin;
            let y1 = ymax - margin;
            if x1 <= x0 || y1 <= y0 {
                return Err(Error::invalid("margin leaves no walk area"));
            }
            let mut rng = StdRng::seed_from_u64(seed);
            let turn = Normal::new(0.0, turn_sd.max(0.0))
                .map_err(|_| Error::invalid("turn standard deviation must be finite"))?;
            let start = Pose::new(0.5 * (x0 + x1), 0.5 * (y0 + y1), 0.0);
            let mut pose = start;
            let mut actions = Vec::with_capacity(*steps);
            for _ in 0..*steps {
                let mut heading = normalize_angle(pose.heading() + turn.sample(&mut rng));
                // Reflect off the walls until the step stays inside.
                for _ in 0..4 {
                    let nx = pose.x + step_len * heading.cos();
                    let ny = pose.y + step_len * heading.sin();
                    let bad_x = nx < x0 || nx > x1;
                    let bad_y = ny < y0 || ny > y1;
                    if !bad_x && !bad_y {
                        break;
                    }
                    if bad_x {
                        heading = normalize_angle(std::f64::consts::PI - heading);
                    }
                    if bad_y {
                        heading = normalize_angle(-heading);
                    }
                }
                let rot1 = normalize_angle(heading - pose.heading());
                let u = OdometryAction::new(rot1, *step_len, 0.0)?;
                pose = apply_action(&pose, &u);
                actions.push((u, pose));
            }
            Trajectory {
                start,
                steps: actions,
            }
        }
        TrajectorySpec::Waypoints { points, step_len } => {
            if points.is_empty() {
                return Err(Error::invalid("waypoint list must be non-empty"));
            }
            if *step_len <= 0.0 || step_len.is_nan() {
                return Err(Error::invalid("step length must be positive"));
            }
            for (x, y) in points {
                if *x < xmin || *x > xmax || *y < ymin || *y > ymax {
                    return Err(Error::invalid(format!(
                        "waypoint ({x}, {y}) outside field bounds"
                    )));
                }
            }
            waypoint_route(points, *step_len)?
        }
    };
    for (_, pose) in &traj.steps {
        if !in_bounds(pose, bounds, 1e-9) {
            return Err(Error::invalid("generated pose left the field bounds"));
        }
    }
    Ok(traj)
}

/// Rotate-then-translate route through the waypoints: the first step toward
/// each waypoint carries the bearing change as `rot1`, subsequent steps on
/// the same segment are straight (`rot1 = 0`); `rot2` is always zero.
fn waypoint_route(points: &[(f64, f64)], step_len: f64) -> Result<Trajectory> {
    let start = Pose::new(points[0].0, points[0].1, 0.0);
    let mut pose = start;
    let mut steps = Vec::new();
    for target in &points[1..] {
        let dx = target.0 - pose.x;
        let dy = target.1 - pose.y;
        let dist = (dx * dx + dy * dy).sqrt();
        if dist < 1e-12 {
            continue;
        }
        let bearing = dy.atan2(dx);
        let n = (dist / step_len).ceil().max(1.0) as usize;
        let seg = dist / n as f64;
        for k in 0..n {
            let rot1 = if k == 0 {
                normalize_angle(bearing - pose.heading())
            } else {
                0.0
            };
            let u = OdometryAction::new(rot1, seg, 0.0)?;
            pose = apply_action(&pose, &u);
            steps.push((u, pose));
        }
    }
    Ok(Trajectory { start, steps })
}
