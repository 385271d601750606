//! Deterministic simulation of missingness patterns.
//!
//! [`contaminate`] hides observed cells of a dataset according to a
//! [`ContaminationSpec`] and returns the contaminated copy together with the
//! [`MaskDelta`] of newly hidden cells, which defines the scoring ground
//! truth. All randomness flows from the spec's seed.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, DeltaSource, MaskDelta};
use crate::error::{Error, Result};
use crate::seed::{rng_from_seed, SeededRng};

/// Missingness pattern family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PatternKind {
    /// One contiguous missing block per contaminated series.
    MonoBlock,
    /// Several fixed-size blocks per contaminated series.
    MultiBlock,
}

/// Cross-series geometry of mono-block contamination.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Arrangement {
    /// Independent uniform start per series.
    #[default]
    Random,
    /// Each series' block starts half a block after the previous series',
    /// wrapping within the legal start range, so adjacent blocks share
    /// columns.
    Overlapping,
    /// Blocks of different series share no column; errors when capacity is
    /// exhausted.
    Disjoint,
    /// Identical block position in every contaminated series.
    Blackout,
}

/// In-series placement of multi-block gaps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Placement {
    /// Starts drawn uniformly over legal positions.
    #[default]
    Uniform,
    /// Starts drawn with weights proportional to a normal density centred at
    /// the middle column with std N/6.
    Gaussian,
}

/// Fraction of series length never contaminated, preserving warm-start
/// context for pattern-search and regression imputers.
pub const DEFAULT_PROTECTED_PREFIX: f64 = 0.10;

/// Declarative description of a missingness pattern.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContaminationSpec {
    pub kind: PatternKind,
    /// Fraction of each contaminated series' length to hide, in [0.01, 0.80].
    pub rate: f64,
    /// Fraction of series contaminated, in (0, 1].
    pub series_fraction: f64,
    /// Mono-block only.
    pub arrangement: Arrangement,
    /// Multi-block only; must not exceed round(rate * N).
    pub block_size: usize,
    /// Multi-block only.
    pub placement: Placement,
    /// Leading fraction of every series that stays untouched, in [0, 0.5].
    pub protected_prefix: f64,
    pub seed: u64,
}

impl ContaminationSpec {
    /// Mono-block spec with random arrangement and default prefix.
    pub fn mono(rate: f64, seed: u64) -> Self {
        ContaminationSpec {
            kind: PatternKind::MonoBlock,
            rate,
            series_fraction: 1.0,
            arrangement: Arrangement::Random,
            block_size: 1,
            placement: Placement::Uniform,
            protected_prefix: DEFAULT_PROTECTED_PREFIX,
            seed,
        }
    }

    /// Multi-block spec with uniform placement and default prefix.
    pub fn multi(rate: f64, block_size: usize, seed: u64) -> Self {
        ContaminationSpec {
            kind: PatternKind::MultiBlock,
            rate,
            series_fraction: 1.0,
            arrangement: Arrangement::Random,
            block_size,
            placement: Placement::Uniform,
            protected_prefix: DEFAULT_PROTECTED_PREFIX,
            seed,
        }
    }

    pub fn with_arrangement(mut self, a: Arrangement) -> Self {
        self.arrangement = a;
        self
    }

    pub fn with_placement(mut self, p: Placement) -> Self {
        self.placement = p;
        self
    }

    pub fn with_series_fraction(mut self, f: f64) -> Self {
        self.series_fraction = f;
        self
    }

    pub fn with_protected_prefix(mut self, p: f64) -> Self {
        self.protected_prefix = p;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_rate(mut self, rate: f64) -> Self {
        self.rate = rate;
        self
    }

    /// Data-independent validity checks.
    pub fn validate(&self) -> Result<()> {
        if !(0.01..=0.80).contains(&self.rate) {
            return Err(Error::Spec(format!(
                "rate must lie in [0.01, 0.80], got {}",
                self.rate
            )));
        }
        if !(self.series_fraction > 0.0 && self.series_fraction <= 1.0) {
            return Err(Error::Spec(format!(
                "series_fraction must lie in (0, 1], got {}",
                self.series_fraction
            )));
        }
        if !(0.0..=0.5).contains(&self.protected_prefix) {
            return Err(Error::Spec(format!(
                "protected_prefix must lie in [0, 0.5], got {}",
                self.protected_prefix
            )));
        }
        if self.protected_prefix + self.rate > 1.0 + 1e-9 {
            return Err(Error::Spec(format!(
                "protected_prefix + rate must not exceed 1, got {}",
                self.protected_prefix + self.rate
            )));
        }
        if self.kind == PatternKind::MultiBlock && self.block_size == 0 {
            return Err(Error::Spec("block_size must be >= 1".into()));
        }
        Ok(())
    }
}

/// round-half-away-from-zero, the convention for round(rate * N).
pub fn round_count(x: f64) -> usize {
    x.round() as usize
}

/// Hides cells of `ds` per `spec`; returns the contaminated dataset and the
/// delta of newly hidden cells.
///
/// Per contaminated series exactly round(rate * N) cells are hidden, all of
/// them observed beforehand and none inside the protected prefix. The result
/// is a pure function of `(ds, spec)`.
pub fn contaminate(ds: &Dataset, spec: &ContaminationSpec) -> Result<(Dataset, MaskDelta)> {
    spec.validate()?;
    let m = ds.n_series();
    let n = ds.n_points();
    let prefix_cols = (spec.protected_prefix * n as f64).ceil() as usize;
    let n_missing = round_count(spec.rate * n as f64);
    if n_missing == 0 {
        return Err(Error::Spec(format!(
            "rate {} over {n} points rounds to zero cells",
            spec.rate
        )));
    }
    if spec.kind == PatternKind::MultiBlock && spec.block_size > n_missing {
        return Err(Error::Spec(format!(
            "block_size {} exceeds round(rate*N) = {n_missing}",
            spec.block_size
        )));
    }

    let mut rng = rng_from_seed(spec.seed);
    let n_contaminated = (round_count(spec.series_fraction * m as f64)).clamp(1, m);
    let targets = pick_series(&mut rng, m, n_contaminated);

    let mut positions: Vec<(usize, usize)> = Vec::with_capacity(n_contaminated * n_missing);
    match spec.kind {
        PatternKind::MonoBlock => {
            let blocks = place_mono_blocks(ds, spec, &targets, prefix_cols, n_missing, &mut rng)?;
            for (&series, &start) in targets.iter().zip(&blocks) {
                positions.extend((start..start + n_missing).map(|j| (series, j)));
            }
        }
        PatternKind::MultiBlock => {
            let lengths = block_lengths(n_missing, spec.block_size);
            for &series in &targets {
                let blocks =
                    place_multi_blocks(ds, spec, series, prefix_cols, &lengths, &mut rng)?;
                for &(start, len) in &blocks {
                    positions.extend((start..start + len).map(|j| (series, j)));
                }
            }
        }
    }

    let delta = MaskDelta::new(positions, DeltaSource::Contaminated);
    let contaminated = ds.hide(&delta)?;
    Ok((contaminated, delta))
}

/// Seeded sample of `k` distinct series indices, returned ascending.
fn pick_series(rng: &mut SeededRng, m: usize, k: usize) -> Vec<usize> {
    let mut picked = rand::seq::index::sample(rng, m, k).into_vec();
    picked.sort_unstable();
    picked
}

/// Splits a per-series cell budget into full blocks plus one remainder block.
fn block_lengths(n_missing: usize, block_size: usize) -> Vec<usize> {
    let mut lengths = vec![block_size; n_missing / block_size];
    let rem = n_missing % block_size;
    if rem > 0 {
        lengths.push(rem);
    }
    lengths
}

/// Legal mono-block starts in one series: inside [prefix, n-len] and fully
/// observed. Contaminating an already-missing cell is forbidden.
fn legal_starts(ds: &Dataset, series: usize, prefix_cols: usize, len: usize) -> Vec<usize> {
    let n = ds.n_points();
    if prefix_cols + len > n {
        return Vec::new();
    }
    (prefix_cols..=n - len)
        .filter(|&s| (s..s + len).all(|j| !ds.is_missing(series, j)))
        .collect()
}

fn place_mono_blocks(
    ds: &Dataset,
    spec: &ContaminationSpec,
    targets: &[usize],
    prefix_cols: usize,
    len: usize,
    rng: &mut SeededRng,
) -> Result<Vec<usize>> {
    let n = ds.n_points();
    if prefix_cols + len > n {
        return Err(Error::Spec(format!(
            "series too short: prefix {prefix_cols} + block {len} exceeds {n} points"
        )));
    }
    let min_start = prefix_cols;
    let max_start = n - len;
    let range = max_start - min_start + 1;

    match spec.arrangement {
        Arrangement::Random => targets
            .iter()
            .map(|&i| pick_uniform(&legal_starts(ds, i, prefix_cols, len), rng, i))
            .collect(),
        Arrangement::Overlapping => {
            let mut starts = Vec::with_capacity(targets.len());
            let mut prev = pick_uniform(&legal_starts(ds, targets[0], prefix_cols, len), rng, targets[0])?;
            starts.push(prev);
            for &i in &targets[1..] {
                let wrapped = min_start + (prev - min_start + len / 2) % range;
                // scan forward cyclically to the nearest fully observed window
                let legal: BTreeSet<usize> =
                    legal_starts(ds, i, prefix_cols, len).into_iter().collect();
                if legal.is_empty() {
                    return Err(no_window(i, len));
                }
                let start = (0..range)
                    .map(|d| min_start + (wrapped - min_start + d) % range)
                    .find(|s| legal.contains(s))
                    .expect("legal set checked non-empty");
                starts.push(start);
                prev = start;
            }
            Ok(starts)
        }
        Arrangement::Disjoint => {
            if targets.len() * len > n.saturating_sub(prefix_cols) {
                return Err(Error::Capacity(format!(
                    "disjoint blocks need {} columns but only {} are available",
                    targets.len() * len,
                    n - prefix_cols
                )));
            }
            let mut starts = Vec::with_capacity(targets.len());
            let mut cursor = prefix_cols;
            for &i in targets {
                let start = (cursor..=max_start)
                    .find(|&s| (s..s + len).all(|j| !ds.is_missing(i, j)))
                    .ok_or_else(|| {
                        Error::Capacity(format!(
                            "no disjoint block of length {len} left for series {i}"
                        ))
                    })?;
                starts.push(start);
                cursor = start + len;
            }
            Ok(starts)
        }
        Arrangement::Blackout => {
            // one position shared by every contaminated series
            let mut common: Option<BTreeSet<usize>> = None;
            for &i in targets {
                let set: BTreeSet<usize> =
                    legal_starts(ds, i, prefix_cols, len).into_iter().collect();
                common = Some(match common {
                    None => set,
                    Some(acc) => acc.intersection(&set).cloned().collect(),
                });
            }
            let common: Vec<usize> = common.unwrap_or_default().into_iter().collect();
            let start = pick_uniform(&common, rng, targets[0])?;
            Ok(vec![start; targets.len()])
        }
    }
}

fn pick_uniform(candidates: &[usize], rng: &mut SeededRng, series: usize) -> Result<usize> {
    if candidates.is_empty() {
        return Err(no_window(series, 0));
    }
    Ok(candidates[rng.random_range(0..candidates.len())])
}

fn no_window(series: usize, len: usize) -> Error {
    Error::Spec(format!(
        "series {series} has no fully observed window of length {len} outside the protected prefix"
    ))
}

/// Places every block of one series without intra-series overlap. Blocks are
/// separated by at least one cell when capacity allows; overlap is never
/// allowed.
fn place_multi_blocks(
    ds: &Dataset,
    spec: &ContaminationSpec,
    series: usize,
    prefix_cols: usize,
    lengths: &[usize],
    rng: &mut SeededRng,
) -> Result<Vec<(usize, usize)>> {
    const ATTEMPTS: usize = 50;
    for require_gap in [true, false] {
        for _ in 0..ATTEMPTS {
            if let Some(blocks) =
                try_place_series(ds, spec, series, prefix_cols, lengths, require_gap, rng)
            {
                return Ok(blocks);
            }
        }
    }
    Err(Error::Spec(format!(
        "cannot place {} blocks totalling {} cells in series {series}",
        lengths.len(),
        lengths.iter().sum::<usize>()
    )))
}

fn try_place_series(
    ds: &Dataset,
    spec: &ContaminationSpec,
    series: usize,
    prefix_cols: usize,
    lengths: &[usize],
    require_gap: bool,
    rng: &mut SeededRng,
) -> Option<Vec<(usize, usize)>> {
    let n = ds.n_points();
    let mut occupied = vec![false; n];
    let mut blocks = Vec::with_capacity(lengths.len());
    for &len in lengths {
        let candidates: Vec<usize> = (prefix_cols..=n.checked_sub(len)?)
            .filter(|&s| {
                let lo = if require_gap { s.saturating_sub(1) } else { s };
                let hi = if require_gap { (s + len + 1).min(n) } else { s + len };
                (s..s + len).all(|j| !ds.is_missing(series, j)) && !occupied[lo..hi].iter().any(|&o| o)
            })
            .collect();
        if candidates.is_empty() {
            return None;
        }
        let start = match spec.placement {
            Placement::Uniform => candidates[rng.random_range(0..candidates.len())],
            Placement::Gaussian => {
                let center = (n / 2) as f64;
                let std = n as f64 / 6.0;
                let weights: Vec<f64> = candidates
                    .iter()
                    .map(|&s| {
                        let z = (s as f64 - center) / std;
                        (-0.5 * z * z).exp()
                    })
                    .collect();
                weighted_pick(&candidates, &weights, rng)
            }
        };
        for j in start..start + len {
            occupied[j] = true;
        }
        blocks.push((start, len));
    }
    blocks.sort_unstable();
    Some(blocks)
}

fn weighted_pick(candidates: &[usize], weights: &[f64], rng: &mut SeededRng) -> usize {
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return candidates[0];
    }
    let mut u = rng.random_range(0.0..total);
    for (&c, &w) in candidates.iter().zip(weights) {
        if u < w {
            return c;
        }
        u -= w;
    }
    *candidates.last().expect("non-empty candidates")
}

/// Summary statistics of a mask delta, for validation and reporting.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaskSummary {
    /// Newly missing cells per series (length M).
    pub per_series_missing: Vec<usize>,
    /// Total number of maximal contiguous blocks across series.
    pub block_count: usize,
    /// block length -> number of blocks of that length
    pub block_length_histogram: BTreeMap<usize, usize>,
    /// Set of time columns touched by the delta.
    pub column_coverage: BTreeSet<usize>,
}

/// Exact integer statistics of `delta` against the dimensions of `ds`.
pub fn mask_stats(delta: &MaskDelta, ds: &Dataset) -> Result<MaskSummary> {
    delta.check_bounds(ds.n_series(), ds.n_points())?;
    let mut per_series: Vec<Vec<usize>> = vec![Vec::new(); ds.n_series()];
    let mut column_coverage = BTreeSet::new();
    for &(i, j) in &delta.positions {
        per_series[i].push(j);
        column_coverage.insert(j);
    }
    let mut block_count = 0;
    let mut histogram = BTreeMap::new();
    let mut per_series_missing = Vec::with_capacity(ds.n_series());
    for cols in &per_series {
        per_series_missing.push(cols.len());
        let mut run = 0usize;
        let mut prev: Option<usize> = None;
        for &j in cols {
            match prev {
                Some(p) if j == p + 1 => run += 1,
                _ => {
                    if run > 0 {
                        block_count += 1;
                        *histogram.entry(run).or_insert(0) += 1;
                    }
                    run = 1;
                }
            }
            prev = Some(j);
        }
        if run > 0 {
            block_count += 1;
            *histogram.entry(run).or_insert(0) += 1;
        }
    }
    Ok(MaskSummary {
        per_series_missing,
        block_count,
        block_length_histogram: histogram,
        column_coverage,
    })
}
