//! Per-step localization records and their CSV formats.

use std::fmt::Write as _;
use std::path::Path;

use crate::config::Method;
use crate::error::{Error, Result};
use crate::motion::Pose;

/// One filtering step's outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub t: u64,
    pub true_pose: Pose,
    pub est_pose: Pose,
    /// Euclidean distance between true and estimated locations.
    pub error: f64,
    /// Wall time of the filter step in milliseconds (measurement only; not
    /// covered by the determinism guarantee).
    pub step_ms: f64,
    /// Serialized size of the filter state (belief plus observation-model
    /// state) after the step.
    pub state_bytes: u64,
}

pub const REPORT_HEADER: &str =
    "t,true_x,true_y,true_heading,est_x,est_y,est_heading,error,step_ms,state_bytes";

pub fn report_to_csv(records: &[StepRecord]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{REPORT_HEADER}");
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            r.t,
            r.true_pose.x,
            r.true_pose.y,
            r.true_pose.heading(),
            r.est_pose.x,
            r.est_pose.y,
            r.est_pose.heading(),
            r.error,
            r.step_ms,
            r.state_bytes
        );
    }
    out
}

pub fn save_report_csv(records: &[StepRecord], path: &Path) -> Result<()> {
    std::fs::write(path, report_to_csv(records))?;
    Ok(())
}

pub fn parse_report_csv(text: &str) -> Result<Vec<StepRecord>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim() == REPORT_HEADER => {}
        Some((_, other)) => {
            return Err(Error::Parse {
                line: 1,
                msg: format!("unexpected report header '{other}'"),
            })
        }
        None => {
            return Err(Error::Parse {
                line: 1,
                msg: "empty report file".into(),
            })
        }
    }
    let mut records = Vec::new();
    for (i, line) in lines {
        let line_no = i + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 10 {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("expected 10 columns, got {}", fields.len()),
            });
        }
        let f = |idx: usize| -> Result<f64> {
            fields[idx].parse::<f64>().map_err(|_| Error::Parse {
                line: line_no,
                msg: format!("column {} is not a number: '{}'", idx + 1, fields[idx]),
            })
        };
        let t = fields[0].parse::<u64>().map_err(|_| Error::Parse {
            line: line_no,
            msg: format!("column 1 is not an integer: '{}'", fields[0]),
        })?;
        let state_bytes = fields[9].parse::<u64>().map_err(|_| Error::Parse {
            line: line_no,
            msg: format!("column 10 is not an integer: '{}'", fields[9]),
        })?;
        records.push(StepRecord {
            t,
            true_pose: Pose::new(f(1)?, f(2)?, f(3)?),
            est_pose: Pose::new(f(4)?, f(5)?, f(6)?),
            error: f(7)?,
            step_ms: f(8)?,
            state_bytes,
        });
    }
    Ok(records)
}

pub fn load_report_csv(path: &Path) -> Result<Vec<StepRecord>> {
    parse_report_csv(&std::fs::read_to_string(path)?)
}

/// One method's per-step timing series.
#[derive(Debug, Clone)]
pub struct TimingSeries {
    pub method: Method,
    /// `(t, step_ms)` pairs, warm-up steps excluded.
    pub series: Vec<(u64, f64)>,
}

pub const TIMING_HEADER: &str = "method,t,step_ms";

pub fn timing_to_csv(series: &[TimingSeries]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{TIMING_HEADER}");
    for ts in series {
        for (t, ms) in &ts.series {
            let _ = writeln!(out, "{},{},{}", ts.method.name(), t, ms);
        }
    }
    out
}

pub fn save_timing_csv(series: &[TimingSeries], path: &Path) -> Result<()> {
    std::fs::write(path, timing_to_csv(series))?;
    Ok(())
}
