//! Experiment configuration: a flat `key = value` text format in which every
//! key has a default and unknown keys are errors.

use std::path::PathBuf;

use crate::error::{Error, Result};
use crate::gp::Hyperparams;
use crate::trajectory::TrajectorySpec;

/// Localization method selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    GpLocalize,
    SodTruncate,
    SodEven,
    FullGp,
    OfflinePitc,
    /// Diagnostic: motion model only, observation likelihood held constant.
    DeadReckoning,
}

impl Method {
    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "gp-localize" => Ok(Method::GpLocalize),
            "sod-truncate" => Ok(Method::SodTruncate),
            "sod-even" => Ok(Method::SodEven),
            "full-gp" => Ok(Method::FullGp),
            "offline-pitc" => Ok(Method::OfflinePitc),
            "dead-reckoning" => Ok(Method::DeadReckoning),
            other => Err(Error::Config(format!(
                "unknown method '{other}' (expected gp-localize, sod-truncate, sod-even, \
                 full-gp, offline-pitc, or dead-reckoning)"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Method::GpLocalize => "gp-localize",
            Method::SodTruncate => "sod-truncate",
            Method::SodEven => "sod-even",
            Method::FullGp => "full-gp",
            Method::OfflinePitc => "offline-pitc",
            Method::DeadReckoning => "dead-reckoning",
        }
    }
}

/// Initial belief family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitBelief {
    /// Gaussian around the known start pose.
    Gaussian,
    /// Uniform over the field bounding box.
    Uniform,
}

/// Trajectory family selector (parameters live in the shared keys).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrajectoryKind {
    Lawnmower,
    RandomWalk,
    Waypoints,
}

/// Full experiment configuration. Defaults follow the standard operating
/// point: `tau = 10`, `support_size = 40`, 400 particles, 400 sample paths.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub method: Method,
    pub seeds: Vec<u64>,
    /// Independent simulation runs per seed; per-seed errors are averaged
    /// over the replicates.
    pub runs_per_seed: usize,

    // Fields: either synthesized per seed or loaded from CSV paths.
    pub num_fields: usize,
    pub field_csv: Vec<PathBuf>,
    pub rows: usize,
    pub cols: usize,
    pub cell_w: f64,
    pub cell_h: f64,
    pub origin_x: f64,
    pub origin_y: f64,
    pub grid_cap: usize,

    // Shared GP hyperparameters for every field.
    pub signal_var: f64,
    pub noise_var: f64,
    pub length_scale_x: f64,
    pub length_scale_y: f64,
    pub prior_mean: f64,
    pub measurement_noise_sd: f64,

    // Online GP and particle filter sizes.
    pub tau: usize,
    pub support_size: usize,
    pub particle_count: usize,
    pub sample_path_count: usize,

    // Odometry noise coefficients (variance scale).
    pub alpha1: f64,
    pub alpha2: f64,
    pub alpha3: f64,
    pub alpha4: f64,

    // Initial belief.
    pub init_belief: InitBelief,
    pub init_sd: f64,
    pub init_heading_sd: f64,
    pub ess_frac: f64,

    // Trajectory.
    pub trajectory: TrajectoryKind,
    pub traj_step_len: f64,
    pub traj_margin: f64,
    pub traj_row_spacing: f64,
    pub traj_turn_sd: f64,
    pub steps: usize,
    pub waypoints: Vec<(f64, f64)>,

    // Benchmark settings.
    pub bench_warmup: usize,
    pub bench_methods: Vec<Method>,

    /// Test hook: record the baseline observation-model internals per step.
    pub capture_obs_trace: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            method: Method::GpLocalize,
            seeds: vec![1],
            runs_per_seed: 1,
            num_fields: 1,
            field_csv: Vec::new(),
            rows: 30,
            cols: 30,
            cell_w: 1.0,
            cell_h: 1.0,
            origin_x: 0.0,
            origin_y: 0.0,
            grid_cap: 4096,
            signal_var: 1.0,
            noise_var: 0.01,
            length_scale_x: 4.0,
            length_scale_y: 4.0,
            prior_mean: 0.0,
            measurement_noise_sd: 0.05,
            tau: 10,
            support_size: 40,
            particle_count: 400,
            sample_path_count: 400,
            alpha1: 0.02,
            alpha2: 0.002,
            alpha3: 0.02,
            alpha4: 0.002,
            init_belief: InitBelief::Gaussian,
            init_sd: 2.0,
            init_heading_sd: 0.1,
            ess_frac: 0.5,
            trajectory: TrajectoryKind::Lawnmower,
            traj_step_len: 1.0,
            traj_margin: 2.0,
            traj_row_spacing: 3.0,
            traj_turn_sd: 0.5,
            steps: 200,
            waypoints: Vec::new(),
            bench_warmup: 5,
            bench_methods: vec![
                Method::GpLocalize,
                Method::SodTruncate,
                Method::SodEven,
                Method::FullGp,
                Method::OfflinePitc,
            ],
            capture_obs_trace: false,
        }
    }
}

impl ExperimentConfig {
    pub fn hyperparams(&self) -> Result<Hyperparams> {
        Hyperparams::new(
            self.signal_var,
            self.noise_var,
            vec![self.length_scale_x, self.length_scale_y],
            self.prior_mean,
        )
    }

    pub fn trajectory_spec(&self) -> Result<TrajectorySpec> {
        Ok(match self.trajectory {
            TrajectoryKind::Lawnmower => TrajectorySpec::Lawnmower {
                margin: self.traj_margin,
                step_len: self.traj_step_len,
                row_spacing: self.traj_row_spacing,
            },
            TrajectoryKind::RandomWalk => TrajectorySpec::RandomWalk {
                margin: self.traj_margin,
                step_len: self.traj_step_len,
                turn_sd: self.traj_turn_sd,
                steps: self.steps,
            },
            TrajectoryKind::Waypoints => {
                if self.waypoints.is_empty() {
                    return Err(Error::Config(
                        "trajectory = waypoints requires a waypoints key".into(),
                    ));
                }
                TrajectorySpec::Waypoints {
                    points: self.waypoints.clone(),
                    step_len: self.traj_step_len,
                }
            }
        })
    }

    /// Parse the flat `key = value` format. Lines starting with `#` and
    /// blank lines are skipped; unknown keys and malformed values are
    /// errors naming the offending line.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("expected 'key = value', got '{line}'"),
                });
            };
            cfg.apply(key.trim(), value.trim(), line_no)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    fn apply(&mut self, key: &str, value: &str, line: usize) -> Result<()> {
        fn bad(line: usize, key: &str, value: &str, want: &str) -> Error {
            Error::Parse {
                line,
                msg: format!("key '{key}': expected {want}, got '{value}'"),
            }
        }
        let parse_f64 = |v: &str, k: &str| -> Result<f64> {
            v.parse::<f64>().map_err(|_| bad(line, k, v, "a number"))
        };
        let parse_usize = |v: &str, k: &str| -> Result<usize> {
            v.parse::<usize>()
                .map_err(|_| bad(line, k, v, "a non-negative integer"))
        };
        match key {
            "method" => self.method = Method::parse(value)?,
            "seeds" => {
                let mut seeds = Vec::new();
                for tok in value.split(',') {
                    seeds.push(
                        tok.trim()
                            .parse::<u64>()
                            .map_err(|_| bad(line, key, value, "comma-separated integers"))?,
                    );
                }
                if seeds.is_empty() {
                    return Err(bad(line, key, value, "at least one seed"));
                }
                self.seeds = seeds;
            }
            "runs_per_seed" => self.runs_per_seed = parse_usize(value, key)?,
            "num_fields" => self.num_fields = parse_usize(value, key)?,
            "field_csv" => {
                self.field_csv = value
                    .split(';')
                    .filter(|s| !s.trim().is_empty())
                    .map(|s| PathBuf::from(s.trim()))
                    .collect();
            }
            "rows" => self.rows = parse_usize(value, key)?,
            "cols" => self.cols = parse_usize(value, key)?,
            "cell_w" => self.cell_w = parse_f64(value, key)?,
            "cell_h" => self.cell_h = parse_f64(value, key)?,
            "origin_x" => self.origin_x = parse_f64(value, key)?,
            "origin_y" => self.origin_y = parse_f64(value, key)?,
            "grid_cap" => self.grid_cap = parse_usize(value, key)?,
            "signal_var" => self.signal_var = parse_f64(value, key)?,
            "noise_var" => self.noise_var = parse_f64(value, key)?,
            "length_scale_x" => self.length_scale_x = parse_f64(value, key)?,
            "length_scale_y" => self.length_scale_y = parse_f64(value, key)?,
            "prior_mean" => self.prior_mean = parse_f64(value, key)?,
            "measurement_noise_sd" => self.measurement_noise_sd = parse_f64(value, key)?,
            "tau" => self.tau = parse_usize(value, key)?,
            "support_size" => self.support_size = parse_usize(value, key)?,
            "particle_count" => self.particle_count = parse_usize(value, key)?,
            "sample_paths" => self.sample_path_count = parse_usize(value, key)?,
            "alpha1" => self.alpha1 = parse_f64(value, key)?,
            "alpha2" => self.alpha2 = parse_f64(value, key)?,
            "alpha3" => self.alpha3 = parse_f64(value, key)?,
            "alpha4" => self.alpha4 = parse_f64(value, key)?,
            "init_belief" => {
                self.init_belief = match value {
                    "gaussian" => InitBelief::Gaussian,
                    "uniform" => InitBelief::Uniform,
                    _ => return Err(bad(line, key, value, "gaussian or uniform")),
                }
            }
            "init_sd" => self.init_sd = parse_f64(value, key)?,
            "init_heading_sd" => self.init_heading_sd = parse_f64(value, key)?,
            "ess_frac" => self.ess_frac = parse_f64(value, key)?,
            "trajectory" => {
                self.trajectory = match value {
                    "lawnmower" => TrajectoryKind::Lawnmower,
                    "random-walk" => TrajectoryKind::RandomWalk,
                    "waypoints" => TrajectoryKind::Waypoints,
                    _ => {
                        return Err(bad(
                            line,
                            key,
                            value,
                            "lawnmower, random-walk, or waypoints",
                        ))
                    }
                }
            }
            "traj_step_len" => self.traj_step_len = parse_f64(value, key)?,
            "traj_margin" => self.traj_margin = parse_f64(value, key)?,
            "traj_row_spacing" => self.traj_row_spacing = parse_f64(value, key)?,
            "traj_turn_sd" => self.traj_turn_sd = parse_f64(value, key)?,
            "steps" => self.steps = parse_usize(value, key)?,
            "waypoints" => {
                let mut points = Vec::new();
                for pair in value.split(';') {
                    let pair = pair.trim();
                    if pair.is_empty() {
                        continue;
                    }
                    let Some((x, y)) = pair.split_once(',') else {
                        return Err(bad(line, key, value, "pairs like 'x,y;x,y'"));
                    };
                    points.push((parse_f64(x.trim(), key)?, parse_f64(y.trim(), key)?));
                }
                self.waypoints = points;
            }
            "bench_warmup" => self.bench_warmup = parse_usize(value, key)?,
            "bench_methods" => {
                let mut methods = Vec::new();
                for tok in value.split(',') {
                    methods.push(Method::parse(tok)?);
                }
                if methods.is_empty() {
                    return Err(bad(line, key, value, "at least one method"));
                }
                self.bench_methods = methods;
            }
            other => {
                return Err(Error::Parse {
                    line,
                    msg: format!("unknown config key '{other}'"),
                })
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_fields == 0 && self.field_csv.is_empty() {
            return Err(Error::Config("num_fields must be at least 1".into()));
        }
        if self.tau == 0 {
            return Err(Error::Config("tau must be at least 1".into()));
        }
        if self.support_size == 0 {
            return Err(Error::Config("support_size must be at least 1".into()));
        }
        if self.particle_count == 0 {
            return Err(Error::Config("particle_count must be at least 1".into()));
        }
        if self.sample_path_count == 0 {
            return Err(Error::Config("sample_paths must be at least 1".into()));
        }
        if self.steps == 0 {
            return Err(Error::Config("steps must be at least 1".into()));
        }
        if self.runs_per_seed == 0 {
            return Err(Error::Config("runs_per_seed must be at least 1".into()));
        }
        if !(self.ess_frac > 0.0 && self.ess_frac <= 1.0) {
            return Err(Error::Config("ess_frac must be in (0, 1]".into()));
        }
        self.hyperparams()
            .map_err(|e| Error::Config(e.to_string()))?;
        Ok(())
    }
}
