//! Model-matrix ingestion and synthetic desk-scale model generators.

use std::path::Path;
use std::str::FromStr;

use ndarray::Array2;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Model, ModelError};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("empty file: no data rows")]
    EmptyFile,
    #[error("ragged row {row}: expected {expected} columns, found {found}")]
    RaggedRow {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("non-numeric cell at row {row}, column {col}: {value:?}")]
    NonNumeric {
        row: usize,
        col: usize,
        value: String,
    },
    #[error("subsample requests {requested} {axis}, source has only {available}")]
    SubsampleTooLarge {
        requested: usize,
        available: usize,
        axis: &'static str,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Loads a rectangular numeric CSV ('.' decimal separator, comma-separated,
/// UTF-8). An optional header row is auto-detected: if any cell of the
/// first row fails to parse as a number, that row is skipped.
///
/// Rows map to ground-set elements, columns to facility/benefit dimensions.
pub fn load_matrix_csv(path: &Path) -> Result<Array2<f64>, DataError> {
    let text = std::fs::read_to_string(path)?;
    parse_matrix_csv(&text)
}

/// CSV parsing backing [`load_matrix_csv`]; row/column indices in errors
/// are 1-based positions in the file.
pub fn parse_matrix_csv(text: &str) -> Result<Array2<f64>, DataError> {
    let lines: Vec<(usize, &str)> = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty())
        .collect();
    if lines.is_empty() {
        return Err(DataError::EmptyFile);
    }

    let parse_row = |line: &str, row: usize| -> Result<Vec<f64>, DataError> {
        line.split(',')
            .enumerate()
            .map(|(col, cell)| {
                let cell = cell.trim();
                f64::from_str(cell).map_err(|_| DataError::NonNumeric {
                    row,
                    col: col + 1,
                    value: cell.to_string(),
                })
            })
            .collect()
    };

    let header_is_data = lines[0]
        .1
        .split(',')
        .all(|cell| f64::from_str(cell.trim()).is_ok());
    let data_lines = if header_is_data { &lines[..] } else { &lines[1..] };
    if data_lines.is_empty() {
        return Err(DataError::EmptyFile);
    }

    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(data_lines.len());
    let ncols = data_lines[0].1.split(',').count();
    for &(lineno, line) in data_lines {
        let found = line.split(',').count();
        if found != ncols {
            return Err(DataError::RaggedRow {
                row: lineno,
                expected: ncols,
                found,
            });
        }
        rows.push(parse_row(line, lineno)?);
    }

    let nrows = rows.len();
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    Ok(Array2::from_shape_vec((nrows, ncols), flat).expect("shape checked above"))
}

/// Uniformly subsamples `n` rows and `l` columns without replacement,
/// reproducibly from `seed`. Selected indices keep their source order.
pub fn subsample_matrix(
    c: &Array2<f64>,
    n: usize,
    l: usize,
    seed: u64,
) -> Result<Array2<f64>, DataError> {
    if n > c.nrows() {
        return Err(DataError::SubsampleTooLarge {
            requested: n,
            available: c.nrows(),
            axis: "rows",
        });
    }
    if l > c.ncols() {
        return Err(DataError::SubsampleTooLarge {
            requested: l,
            available: c.ncols(),
            axis: "columns",
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = sample_indices(c.nrows(), n, &mut rng);
    let cols = sample_indices(c.ncols(), l, &mut rng);
    let mut out = Array2::zeros((n, l));
    for (a, &i) in rows.iter().enumerate() {
        for (b, &j) in cols.iter().enumerate() {
            out[[a, b]] = c[[i, j]];
        }
    }
    Ok(out)
}

fn sample_indices<R: Rng>(total: usize, take: usize, rng: &mut R) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..total).collect();
    for i in 0..take {
        let j = rng.random_range(i..total);
        idx.swap(i, j);
    }
    let mut chosen = idx[..take].to_vec();
    chosen.sort_unstable();
    chosen
}

/// Synthetic stand-ins for the benchmark data sets, which are not
/// redistributable. Shapes match the originals; the scales below are
/// calibration choices, documented in the README.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SynthKind {
    /// Facility location with sparse, heavy-tailed nonnegative coverage.
    WaterLike,
    /// Log-det DPP with kernel `G G^T + eps I`.
    SensorLike,
    /// Facility-location diversity model with per-element quality weights.
    GameLike,
}

impl FromStr for SynthKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "water-like" => Ok(SynthKind::WaterLike),
            "sensor-like" => Ok(SynthKind::SensorLike),
            "game-like" => Ok(SynthKind::GameLike),
            other => Err(format!(
                "unknown synthetic model kind {other:?} (expected water-like, sensor-like, or game-like)"
            )),
        }
    }
}

/// Default DPP noise parameter for sensor-like kernels. The source data's
/// noise level is not published; this value is an arbitrary default.
pub const SENSOR_SIGMA_DEFAULT: f64 = 1.0;

/// Diagonal regularizer guaranteeing positive definiteness of synthetic
/// kernels.
pub const SENSOR_KERNEL_EPS: f64 = 1e-6;

/// Generates a model of the requested family, reproducibly from `seed`.
///
/// `l` is the number of coverage columns for the facility-location
/// families and the latent feature dimension for sensor-like kernels.
pub fn synthesize_model(kind: SynthKind, n: usize, l: usize, seed: u64) -> Result<Model, DataError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let model = match kind {
        SynthKind::WaterLike => Model::facility_location(water_like_coverage(n, l, &mut rng))?,
        SynthKind::SensorLike => {
            let d = l.max(1);
            let mut g = Array2::zeros((n, d));
            for i in 0..n {
                for j in 0..d {
                    g[[i, j]] = standard_normal(&mut rng);
                }
            }
            let mut k = g.dot(&g.t());
            for i in 0..n {
                k[[i, i]] += SENSOR_KERNEL_EPS;
            }
            Model::log_det_dpp(k, SENSOR_SIGMA_DEFAULT)?
        }
        SynthKind::GameLike => {
            let coverage = water_like_coverage(n, l, &mut rng);
            let weights = (0..n).map(|_| 1.5 * standard_normal(&mut rng)).collect();
            Model::fl_diversity(weights, coverage)?
        }
    };
    Ok(model)
}

/// Sparse heavy-tailed nonnegative coverage. Each column represents an
/// event detectable by a few elements; per-column magnitudes are
/// exponential so a minority of columns dominate, which is what slows
/// single-site samplers down on the real data.
fn water_like_coverage<R: Rng>(n: usize, l: usize, rng: &mut R) -> Array2<f64> {
    let mut c = Array2::zeros((n, l));
    for j in 0..l {
        let magnitude = 8.0 * exponential(rng);
        // Between 2 and ~n/4 detecting elements per column.
        let detectors = 2 + (rng.random::<f64>() * (n as f64 / 4.0)) as usize;
        for _ in 0..detectors {
            let i = rng.random_range(0..n);
            let quality = rng.random::<f64>();
            let value = magnitude * quality;
            if value > c[[i, j]] {
                c[[i, j]] = value;
            }
        }
    }
    c
}

fn standard_normal<R: Rng>(rng: &mut R) -> f64 {
    // Box-Muller; one value per call keeps the stream layout simple.
    let u1: f64 = rng.random::<f64>().max(1e-300);
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

fn exponential<R: Rng>(rng: &mut R) -> f64 {
    -(rng.random::<f64>().max(1e-300)).ln()
}
