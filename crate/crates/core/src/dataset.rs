//! Dataset representation, file I/O, and normalization.
//!
//! A [`Dataset`] is an M-by-N real matrix (one row per series, one column per
//! time step) with an aligned boolean mask. NaN is the single missing
//! sentinel: a cell is NaN in `values` exactly when `mask` is true there.
//! Instances are immutable; every operation returns a new `Dataset`.

use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// On-disk layout of a matrix file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Orientation {
    /// Each line is one series.
    SeriesRows,
    /// Each line is one time step; the matrix is transposed on load.
    SeriesColumns,
}

/// Which transform, if any, the values currently live under.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Normalization {
    #[default]
    None,
    Zscore,
    Minmax,
}

impl fmt::Display for Normalization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Normalization::None => write!(f, "none"),
            Normalization::Zscore => write!(f, "zscore"),
            Normalization::Minmax => write!(f, "minmax"),
        }
    }
}

/// Per-series parameters stored by [`Dataset::normalize`] so that
/// [`Dataset::denormalize`] can invert the transform exactly.
///
/// For z-score these are (mean, std); for min-max, (min, max - min).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesScale {
    pub offset: f64,
    pub scale: f64,
}

/// Where a set of masked positions came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DeltaSource {
    /// Missing in the file as loaded.
    Loaded,
    /// Hidden by a contamination step; ground truth exists for these cells.
    Contaminated,
}

/// A record of masked cells: the unit of contamination and of masked scoring.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaskDelta {
    /// (series index, time index) pairs, unique, sorted ascending.
    pub positions: Vec<(usize, usize)>,
    pub source: DeltaSource,
}

impl MaskDelta {
    /// Builds a delta from positions, sorting and deduplicating them.
    pub fn new(mut positions: Vec<(usize, usize)>, source: DeltaSource) -> Self {
        positions.sort_unstable();
        positions.dedup();
        MaskDelta { positions, source }
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Errors unless every position is inside an M-by-N matrix.
    pub fn check_bounds(&self, n_series: usize, n_points: usize) -> Result<()> {
        for &(i, j) in &self.positions {
            if i >= n_series || j >= n_points {
                return Err(Error::State(format!(
                    "delta position ({i},{j}) outside {n_series}x{n_points} matrix"
                )));
            }
        }
        Ok(())
    }
}

/// An immutable M-by-N time series matrix with an aligned missingness mask.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    values: Vec<Vec<f64>>,
    mask: Vec<Vec<bool>>,
    series_names: Vec<String>,
    normalization: Normalization,
    scales: Vec<SeriesScale>,
}

impl Dataset {
    /// Builds a dataset from raw rows. The mask is derived from NaN cells.
    ///
    /// Requires at least one series and at least three time points, and all
    /// rows of equal length.
    pub fn new(values: Vec<Vec<f64>>) -> Result<Self> {
        let names = (0..values.len()).map(|i| format!("s{i}")).collect();
        Self::with_names(values, names)
    }

    /// Like [`Dataset::new`] with explicit series names.
    pub fn with_names(values: Vec<Vec<f64>>, series_names: Vec<String>) -> Result<Self> {
        let m = values.len();
        if m == 0 {
            return Err(Error::Shape("dataset needs at least one series".into()));
        }
        let n = values[0].len();
        for (i, row) in values.iter().enumerate() {
            if row.len() != n {
                return Err(Error::Shape(format!(
                    "series {i} has {} points, expected {n}",
                    row.len()
                )));
            }
        }
        if n < 3 {
            return Err(Error::Shape(format!(
                "dataset needs at least 3 time points, got {n}"
            )));
        }
        if series_names.len() != m {
            return Err(Error::Shape(format!(
                "{} series names for {m} series",
                series_names.len()
            )));
        }
        let mask = values
            .iter()
            .map(|row| row.iter().map(|v| v.is_nan()).collect())
            .collect();
        Ok(Dataset {
            values,
            mask,
            series_names,
            normalization: Normalization::None,
            scales: Vec::new(),
        })
    }

    pub fn n_series(&self) -> usize {
        self.values.len()
    }

    pub fn n_points(&self) -> usize {
        self.values[0].len()
    }

    pub fn value(&self, series: usize, t: usize) -> f64 {
        self.values[series][t]
    }

    pub fn is_missing(&self, series: usize, t: usize) -> bool {
        self.mask[series][t]
    }

    pub fn series(&self, i: usize) -> &[f64] {
        &self.values[i]
    }

    pub fn mask_row(&self, i: usize) -> &[bool] {
        &self.mask[i]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn series_names(&self) -> &[String] {
        &self.series_names
    }

    pub fn normalization(&self) -> Normalization {
        self.normalization
    }

    /// Per-series normalization parameters; empty when not normalized.
    pub fn scales(&self) -> &[SeriesScale] {
        &self.scales
    }

    /// Observed values of one series, in time order.
    pub fn observed(&self, i: usize) -> Vec<f64> {
        self.values[i]
            .iter()
            .zip(&self.mask[i])
            .filter(|(_, &m)| !m)
            .map(|(&v, _)| v)
            .collect()
    }

    /// Observed (time index, value) pairs of one series, in time order.
    pub fn observed_pairs(&self, i: usize) -> Vec<(usize, f64)> {
        self.values[i]
            .iter()
            .enumerate()
            .zip(&self.mask[i])
            .filter(|(_, &m)| !m)
            .map(|((j, &v), _)| (j, v))
            .collect()
    }

    pub fn observed_count(&self, i: usize) -> usize {
        self.mask[i].iter().filter(|&&m| !m).count()
    }

    /// All masked positions in (series, time) order.
    pub fn masked_positions(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (i, row) in self.mask.iter().enumerate() {
            for (j, &m) in row.iter().enumerate() {
                if m {
                    out.push((i, j));
                }
            }
        }
        out
    }

    pub fn missing_count(&self) -> usize {
        self.mask.iter().flatten().filter(|&&m| m).count()
    }

    /// Returns a copy with the delta's cells hidden (set to NaN and masked).
    ///
    /// Positions must be in range and currently observed.
    pub fn hide(&self, delta: &MaskDelta) -> Result<Dataset> {
        delta.check_bounds(self.n_series(), self.n_points())?;
        let mut out = self.clone();
        for &(i, j) in &delta.positions {
            if out.mask[i][j] {
                return Err(Error::State(format!(
                    "cell ({i},{j}) is already missing; cannot hide it again"
                )));
            }
            out.values[i][j] = f64::NAN;
            out.mask[i][j] = true;
        }
        Ok(out)
    }

    /// Returns a copy with `new_values` substituted; the mask is recomputed
    /// from NaN cells. Used by imputation to build fully observed results.
    pub fn with_values(&self, new_values: Vec<Vec<f64>>) -> Result<Dataset> {
        let mut out = Self::with_names(new_values, self.series_names.clone())?;
        if out.n_series() != self.n_series() || out.n_points() != self.n_points() {
            return Err(Error::Shape("replacement values change dimensions".into()));
        }
        out.normalization = self.normalization;
        out.scales = self.scales.clone();
        Ok(out)
    }

    /// Restricts the dataset to the given series rows, in the given order.
    pub fn select_series(&self, indices: &[usize]) -> Result<Dataset> {
        if indices.is_empty() {
            return Err(Error::Shape("empty series selection".into()));
        }
        let mut values = Vec::with_capacity(indices.len());
        let mut names = Vec::with_capacity(indices.len());
        let mut scales = Vec::new();
        for &i in indices {
            if i >= self.n_series() {
                return Err(Error::Shape(format!("series index {i} out of range")));
            }
            values.push(self.values[i].clone());
            names.push(self.series_names[i].clone());
            if !self.scales.is_empty() {
                scales.push(self.scales[i]);
            }
        }
        let mut out = Self::with_names(values, names)?;
        out.normalization = self.normalization;
        out.scales = scales;
        Ok(out)
    }

    /// Restricts the dataset to time columns `[0, n_cols)`.
    pub fn truncate_time(&self, n_cols: usize) -> Result<Dataset> {
        if n_cols < 3 || n_cols > self.n_points() {
            return Err(Error::Shape(format!(
                "cannot truncate {}-point dataset to {n_cols} columns",
                self.n_points()
            )));
        }
        let values = self.values.iter().map(|r| r[..n_cols].to_vec()).collect();
        let mut out = Self::with_names(values, self.series_names.clone())?;
        out.normalization = self.normalization;
        out.scales = self.scales.clone();
        Ok(out)
    }

    /// Loads a matrix from a text file.
    ///
    /// One record per line, comma- or whitespace-separated (auto-detected,
    /// comma preferred), `NaN` (any case) marks a missing cell. `header`
    /// skips the first line.
    pub fn load(path: impl AsRef<Path>, orientation: Orientation, header: bool) -> Result<Self> {
        let text = fs::read_to_string(path.as_ref())?;
        Self::parse(&text, orientation, header)
    }

    /// Parses matrix text; see [`Dataset::load`].
    pub fn parse(text: &str, orientation: Orientation, header: bool) -> Result<Self> {
        // (1-based line number, content) for non-blank lines
        let lines: Vec<(usize, &str)> = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l))
            .filter(|(_, l)| !l.trim().is_empty())
            .skip(if header { 1 } else { 0 })
            .collect();
        if lines.is_empty() {
            return Err(Error::Shape("file contains no data rows".into()));
        }
        let comma = lines.iter().any(|(_, l)| l.contains(','));
        let mut grid: Vec<Vec<f64>> = Vec::with_capacity(lines.len());
        let mut arity = None;
        for &(lineno, line) in &lines {
            let tokens: Vec<&str> = if comma {
                line.split(',').map(str::trim).collect()
            } else {
                line.split_whitespace().collect()
            };
            let want = *arity.get_or_insert(tokens.len());
            if tokens.len() != want {
                return Err(Error::Parse {
                    line: lineno,
                    msg: format!("expected {want} fields, found {}", tokens.len()),
                });
            }
            let mut row = Vec::with_capacity(tokens.len());
            for tok in tokens {
                if tok.eq_ignore_ascii_case("nan") {
                    row.push(f64::NAN);
                    continue;
                }
                let v: f64 = tok.parse().map_err(|_| Error::Parse {
                    line: lineno,
                    msg: format!("invalid number `{tok}`"),
                })?;
                row.push(v);
            }
            grid.push(row);
        }
        let values = match orientation {
            Orientation::SeriesRows => grid,
            Orientation::SeriesColumns => transpose(&grid),
        };
        Self::new(values)
    }

    /// Writes the matrix as comma-separated text, masked cells as `NaN`.
    ///
    /// Values are written in shortest round-trip form, so load∘save is exact.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path.as_ref(), self.to_csv_string())?;
        Ok(())
    }

    /// The comma-separated text form written by [`Dataset::save`].
    pub fn to_csv_string(&self) -> String {
        let mut out = String::new();
        for (row, mrow) in self.values.iter().zip(&self.mask) {
            let line: Vec<String> = row
                .iter()
                .zip(mrow)
                .map(|(&v, &m)| if m { "NaN".to_string() } else { format!("{v}") })
                .collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        out
    }

    /// Rescales each series over its observed cells only.
    ///
    /// `zscore` maps to observed mean 0 and population std 1; `minmax` maps
    /// the observed range onto [0, 1]. Constant series map to all zeros.
    /// Parameters are stored per series so [`Dataset::denormalize`] is exact.
    pub fn normalize(&self, method: Normalization) -> Result<Dataset> {
        if method == Normalization::None {
            return Err(Error::State("normalize requires zscore or minmax".into()));
        }
        if self.normalization != Normalization::None {
            return Err(Error::State(format!(
                "dataset is already {}-normalized",
                self.normalization
            )));
        }
        let mut out = self.clone();
        out.normalization = method;
        out.scales = Vec::with_capacity(self.n_series());
        for i in 0..self.n_series() {
            let obs = self.observed(i);
            if obs.len() < 2 {
                return Err(Error::DegenerateSeries {
                    series: i,
                    msg: format!("{} observed points, need at least 2", obs.len()),
                });
            }
            let (offset, raw_scale) = match method {
                Normalization::Zscore => {
                    let mean = obs.iter().sum::<f64>() / obs.len() as f64;
                    let var =
                        obs.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / obs.len() as f64;
                    (mean, var.sqrt())
                }
                Normalization::Minmax => {
                    let lo = obs.iter().cloned().fold(f64::INFINITY, f64::min);
                    let hi = obs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    (lo, hi - lo)
                }
                Normalization::None => unreachable!(),
            };
            // degenerate-scale guard: constant series map to all zeros
            let scale = if raw_scale > 0.0 { raw_scale } else { 1.0 };
            for j in 0..self.n_points() {
                if !self.mask[i][j] {
                    out.values[i][j] = (self.values[i][j] - offset) / scale;
                }
            }
            out.scales.push(SeriesScale { offset, scale });
        }
        Ok(out)
    }

    /// Inverts [`Dataset::normalize`] using the stored parameters.
    pub fn denormalize(&self) -> Result<Dataset> {
        if self.normalization == Normalization::None {
            return Err(Error::State("dataset is not normalized".into()));
        }
        let mut out = self.clone();
        for i in 0..self.n_series() {
            let SeriesScale { offset, scale } = self.scales[i];
            for j in 0..self.n_points() {
                if !self.mask[i][j] {
                    out.values[i][j] = self.values[i][j] * scale + offset;
                }
            }
        }
        out.normalization = Normalization::None;
        out.scales.clear();
        Ok(out)
    }
}

fn transpose(grid: &[Vec<f64>]) -> Vec<Vec<f64>> {
    if grid.is_empty() {
        return Vec::new();
    }
    let rows = grid.len();
    let cols = grid[0].len();
    (0..cols)
        .map(|j| (0..rows).map(|i| grid[i][j]).collect())
        .collect()
}
