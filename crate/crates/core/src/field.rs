//! Gridded scalar fields: synthesis from a GP prior, bilinear measurement
//! with optional sensor noise, and a lossless CSV format.
//!
//! Grid convention: `origin` is the center of cell `(row 0, col 0)`; the
//! center of cell `(r, c)` sits at `origin + (c * cell_w, r * cell_h)`.
//! Values are stored row-major. The measurable area is the convex hull of
//! the cell centers.

use std::fmt::Write as _;
use std::path::Path;

use rand::rngs::StdRng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::gp::{sample_gp_prior, Hyperparams, Location};

/// Largest `rows * cols` accepted by [`synthesize_field`]; prior sampling is
/// cubic in the cell count.
pub const DEFAULT_SYNTH_CAP: usize = 4096;

/// A rectangular gridded scalar field used as the simulation ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldGrid {
    origin_x: f64,
    origin_y: f64,
    cell_w: f64,
    cell_h: f64,
    rows: usize,
    cols: usize,
    values: Vec<f64>,
    noise_sd: f64,
}

impl FieldGrid {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        origin_x: f64,
        origin_y: f64,
        cell_w: f64,
        cell_h: f64,
        rows: usize,
        cols: usize,
        values: Vec<f64>,
        noise_sd: f64,
    ) -> Result<Self> {
        if !(cell_w > 0.0 && cell_h > 0.0) {
            return Err(Error::invalid("cell sizes must be positive"));
        }
        if rows == 0 || cols == 0 {
            return Err(Error::invalid("grid must have at least one row and column"));
        }
        if values.len() != rows * cols {
            return Err(Error::invalid(format!(
                "grid needs {} values, got {}",
                rows * cols,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("grid values must be finite"));
        }
        if !noise_sd.is_finite() || noise_sd < 0.0 {
            return Err(Error::invalid("measurement noise sd must be >= 0"));
        }
        if !(origin_x.is_finite() && origin_y.is_finite()) {
            return Err(Error::invalid("origin must be finite"));
        }
        Ok(FieldGrid {
            origin_x,
            origin_y,
            cell_w,
            cell_h,
            rows,
            cols,
            values,
            noise_sd,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn noise_sd(&self) -> f64 {
        self.noise_sd
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value_at(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.cols + col]
    }

    pub fn cell_center(&self, row: usize, col: usize) -> Location {
        Location::xy(
            self.origin_x + col as f64 * self.cell_w,
            self.origin_y + row as f64 * self.cell_h,
        )
    }

    /// All cell centers in row-major order (the support-set candidate pool).
    pub fn cell_centers(&self) -> Vec<Location> {
        let mut out = Vec::with_capacity(self.rows * self.cols);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.push(self.cell_center(r, c));
            }
        }
        out
    }

    /// Measurable bounds `(xmin, xmax, ymin, ymax)`: the hull of the centers.
    pub fn bounds(&self) -> (f64, f64, f64, f64) {
        (
            self.origin_x,
            self.origin_x + (self.cols - 1) as f64 * self.cell_w,
            self.origin_y,
            self.origin_y + (self.rows - 1) as f64 * self.cell_h,
        )
    }

    /// Noise-free bilinear interpolation of the four surrounding cell values.
    pub fn interpolate(&self, x: &Location) -> Result<f64> {
        if x.dim() != 2 {
            return Err(Error::invalid("field locations are 2-D"));
        }
        let (xmin, xmax, ymin, ymax) = self.bounds();
        let (px, py) = (x.coords()[0], x.coords()[1]);
        if px < xmin || px > xmax || py < ymin || py > ymax {
            return Err(Error::invalid(format!(
                "location ({px}, {py}) outside grid bounds [{xmin}, {xmax}] x [{ymin}, {ymax}]"
            )));
        }
        let fx = (px - self.origin_x) / self.cell_w;
        let fy = (py - self.origin_y) / self.cell_h;
        let c0 = (fx.floor() as usize).min(self.cols - 1);
        let r0 = (fy.floor() as usize).min(self.rows - 1);
        let c1 = (c0 + 1).min(self.cols - 1);
        let r1 = (r0 + 1).min(self.rows - 1);
        let tx = (fx - c0 as f64).clamp(0.0, 1.0);
        let ty = (fy - r0 as f64).clamp(0.0, 1.0);
        let v00 = self.value_at(r0, c0);
        let v01 = self.value_at(r0, c1);
        let v10 = self.value_at(r1, c0);
        let v11 = self.value_at(r1, c1);
        Ok(v00 * (1.0 - tx) * (1.0 - ty)
            + v01 * tx * (1.0 - ty)
            + v10 * (1.0 - tx) * ty
            + v11 * tx * ty)
    }

    /// Simulated measurement: bilinear interpolation plus Gaussian sensor
    /// noise of the grid's configured standard deviation.
    pub fn measure(&self, x: &Location, rng: &mut StdRng) -> Result<f64> {
        let clean = self.interpolate(x)?;
        if self.noise_sd > 0.0 {
            let noise = Normal::new(0.0, self.noise_sd)
                .expect("finite sd")
                .sample(rng);
            Ok(clean + noise)
        } else {
            Ok(clean)
        }
    }

    /// Serialize to the field CSV format: a header line
    /// `origin_x,origin_y,cell_w,cell_h,rows,cols,noise_sd` followed by
    /// `rows` lines of `cols` comma-separated values, row-major from the
    /// origin. Floats use the shortest round-trip representation, so a
    /// save/load cycle is lossless.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            self.origin_x,
            self.origin_y,
            self.cell_w,
            self.cell_h,
            self.rows,
            self.cols,
            self.noise_sd
        );
        for r in 0..self.rows {
            let row: Vec<String> = (0..self.cols)
                .map(|c| format!("{}", self.value_at(r, c)))
                .collect();
            let _ = writeln!(out, "{}", row.join(","));
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty());
        let (line_no, header) = lines.next().ok_or(Error::Parse {
            line: 1,
            msg: "empty field file".into(),
        })?;
        let fields: Vec<&str> = header.split(',').collect();
        if fields.len() != 7 {
            return Err(Error::Parse {
                line: line_no,
                msg: format!(
                    "header needs 7 comma-separated values, got {}",
                    fields.len()
                ),
            });
        }
        let parse_f = |s: &str, line: usize| -> Result<f64> {
            s.trim().parse::<f64>().map_err(|_| Error::Parse {
                line,
                msg: format!("expected a number, got '{s}'"),
            })
        };
        let parse_u = |s: &str, line: usize| -> Result<usize> {
            s.trim().parse::<usize>().map_err(|_| Error::Parse {
                line,
                msg: format!("expected a non-negative integer, got '{s}'"),
            })
        };
        let origin_x = parse_f(fields[0], line_no)?;
        let origin_y = parse_f(fields[1], line_no)?;
        let cell_w = parse_f(fields[2], line_no)?;
        let cell_h = parse_f(fields[3], line_no)?;
        let rows = parse_u(fields[4], line_no)?;
        let cols = parse_u(fields[5], line_no)?;
        let noise_sd = parse_f(fields[6], line_no)?;

        let mut values = Vec::with_capacity(rows * cols);
        let mut last_line = line_no;
        for (line, text) in lines {
            last_line = line;
            for tok in text.split(',') {
                values.push(parse_f(tok, line)?);
            }
        }
        if values.len() != rows * cols {
            return Err(Error::Parse {
                line: last_line,
                msg: format!(
                    "expected {} grid values ({} rows x {} cols), got {}",
                    rows * cols,
                    rows,
                    cols,
                    values.len()
                ),
            });
        }
        FieldGrid::new(
            origin_x, origin_y, cell_w, cell_h, rows, cols, values, noise_sd,
        )
        .map_err(|e| Error::Parse {
            line: last_line,
            msg: e.to_string(),
        })
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }

    pub fn load_csv(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        FieldGrid::from_csv(&text)
    }
}

/// Draw a field as one GP prior realization over the cell centers.
/// Deterministic per seed. `rows * cols` must not exceed `cap`.
#[allow(clippy::too_many_arguments)]
pub fn synthesize_field(
    rows: usize,
    cols: usize,
    h: &Hyperparams,
    seed: u64,
    origin: (f64, f64),
    cell_size: (f64, f64),
    noise_sd: f64,
    cap: usize,
) -> Result<FieldGrid> {
    if rows == 0 || cols == 0 {
        return Err(Error::invalid("grid must have at least one row and column"));
    }
    if rows * cols > cap {
        return Err(Error::invalid(format!(
            "grid of {rows}x{cols} exceeds the synthesis cap of {cap} cells"
        )));
    }
    let grid = FieldGrid::new(
        origin.0,
        origin.1,
        cell_size.0,
        cell_size.1,
        rows,
        cols,
        vec![0.0; rows * cols],
        noise_sd,
    )?;
    let centers = grid.cell_centers();
    let values = sample_gp_prior(&centers, h, seed)?;
    FieldGrid::new(
        origin.0,
        origin.1,
        cell_size.0,
        cell_size.1,
        rows,
        cols,
        values,
        noise_sd,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gp::covariance;
    use rand::SeedableRng;

    fn h_iso(signal_var: f64, ls: f64) -> Hyperparams {
        Hyperparams::new(signal_var, 0.0, vec![ls, ls], 0.0).unwrap()
    }

    #[test]
    fn single_cell_grid_is_one_prior_draw() {
        let h = h_iso(1.0, 1.0);
        let g = synthesize_field(1, 1, &h, 9, (0.0, 0.0), (1.0, 1.0), 0.0, 16).unwrap();
        let direct = sample_gp_prior(&[Location::xy(0.0, 0.0)], &h, 9).unwrap();
        assert_eq!(g.values(), direct.as_slice());
    }

    #[test]
    fn synthesis_is_deterministic_per_seed() {
        let h = h_iso(1.0, 2.0);
        let a = synthesize_field(5, 4, &h, 3, (0.0, 0.0), (1.0, 1.0), 0.1, 4096).unwrap();
        let b = synthesize_field(5, 4, &h, 3, (0.0, 0.0), (1.0, 1.0), 0.1, 4096).unwrap();
        assert_eq!(a, b);
        let c = synthesize_field(5, 4, &h, 4, (0.0, 0.0), (1.0, 1.0), 0.1, 4096).unwrap();
        assert_ne!(a.values(), c.values());
    }

    #[test]
    fn synthesis_cap_is_enforced() {
        let h = h_iso(1.0, 1.0);
        assert!(matches!(
            synthesize_field(100, 100, &h, 0, (0.0, 0.0), (1.0, 1.0), 0.0, 4096),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn measurement_at_cell_center_is_exact() {
        let grid = FieldGrid::new(
            1.0,
            2.0,
            0.5,
            0.5,
            2,
            3,
            vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0],
            0.0,
        )
        .unwrap();
        let mut rng = StdRng::seed_from_u64(0);
        let z = grid.measure(&grid.cell_center(1, 2), &mut rng).unwrap();
        assert_eq!(z, 6.0);
    }

    #[test]
    fn measurement_at_midpoint_averages_neighbors() {
        let grid = FieldGrid::new(0.0, 0.0, 1.0, 1.0, 1, 2, vec![2.0, 4.0], 0.0).unwrap();
        let mut rng = StdRng::seed_from_u64(0);
        let z = grid.measure(&Location::xy(0.5, 0.0), &mut rng).unwrap();
        assert_eq!(z, 3.0);
    }

    #[test]
    fn interior_point_matches_independent_bilinear_formula() {
        let grid = FieldGrid::new(0.0, 0.0, 2.0, 1.0, 2, 2, vec![1.0, 5.0, 3.0, 9.0], 0.0).unwrap();
        let (px, py) = (1.3, 0.4);
        let tx = px / 2.0;
        let ty = py / 1.0;
        let expected = 1.0 * (1.0 - tx) * (1.0 - ty)
            + 5.0 * tx * (1.0 - ty)
            + 3.0 * (1.0 - tx) * ty
            + 9.0 * tx * ty;
        let got = grid.interpolate(&Location::xy(px, py)).unwrap();
        assert!((got - expected).abs() < 1e-14);
    }

    #[test]
    fn out_of_bounds_measurement_is_rejected() {
        let grid = FieldGrid::new(0.0, 0.0, 1.0, 1.0, 2, 2, vec![0.0; 4], 0.0).unwrap();
        let mut rng = StdRng::seed_from_u64(0);
        assert!(matches!(
            grid.measure(&Location::xy(1.5, 0.0), &mut rng),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn csv_round_trip_is_lossless() {
        let h = h_iso(1.3, 2.0);
        let grid = synthesize_field(6, 5, &h, 12, (-1.5, 2.25), (0.75, 1.25), 0.15, 4096).unwrap();
        let restored = FieldGrid::from_csv(&grid.to_csv()).unwrap();
        assert_eq!(grid, restored);
    }

    #[test]
    fn empty_and_malformed_files_give_parse_errors() {
        assert!(matches!(
            FieldGrid::from_csv(""),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(matches!(
            FieldGrid::from_csv("\n\n\n"),
            Err(Error::Parse { .. })
        ));
        let bad_value = "0,0,1,1,1,2,0\n1.0,oops\n";
        match FieldGrid::from_csv(bad_value) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
        let short = "0,0,1,1,2,2,0\n1.0,2.0\n";
        assert!(matches!(
            FieldGrid::from_csv(short),
            Err(Error::Parse { .. })
        ));
    }

    #[test]
    fn handwritten_fixture_maps_values_to_cells() {
        let text = "10,20,2,3,2,2,0.5\n1.5,2.5\n-3.25,4\n";
        let grid = FieldGrid::from_csv(text).unwrap();
        assert_eq!(grid.value_at(0, 0), 1.5);
        assert_eq!(grid.value_at(0, 1), 2.5);
        assert_eq!(grid.value_at(1, 0), -3.25);
        assert_eq!(grid.value_at(1, 1), 4.0);
        assert_eq!(grid.cell_center(1, 1), Location::xy(12.0, 23.0));
        assert_eq!(grid.noise_sd(), 0.5);
    }

    #[test]
    fn empirical_variogram_is_consistent_with_the_kernel() {
        // Average the empirical semivariogram over independent field draws
        // and compare with the kernel's implied variogram at three lags,
        // within three standard errors across the replicates.
        let h = h_iso(1.0, 3.0);
        let seeds = 30;
        let lags = [1usize, 2, 3];
        let mut per_seed: Vec<[f64; 3]> = Vec::new();
        for seed in 0..seeds {
            let grid =
                synthesize_field(20, 20, &h, seed, (0.0, 0.0), (1.0, 1.0), 0.0, 4096).unwrap();
            let mut gammas = [0.0f64; 3];
            for (li, lag) in lags.iter().enumerate() {
                let mut sum = 0.0;
                let mut count = 0usize;
                for r in 0..20 {
                    for c in 0..(20 - lag) {
                        let d = grid.value_at(r, c) - grid.value_at(r, c + lag);
                        sum += 0.5 * d * d;
                        count += 1;
                    }
                }
                gammas[li] = sum / count as f64;
            }
            per_seed.push(gammas);
        }
        for (li, lag) in lags.iter().enumerate() {
            let x0 = Location::xy(0.0, 0.0);
            let x1 = Location::xy(*lag as f64, 0.0);
            let theory = h.signal_var() - covariance(&x0, &x1, &h).unwrap();
            let mean = per_seed.iter().map(|g| g[li]).sum::<f64>() / seeds as f64;
            let var =
                per_seed.iter().map(|g| (g[li] - mean).powi(2)).sum::<f64>() / (seeds as f64 - 1.0);
            let se = (var / seeds as f64).sqrt();
            assert!(
                (mean - theory).abs() <= 3.0 * se,
                "lag {lag}: empirical {mean} theory {theory} se {se}"
            );
        }
    }
}
