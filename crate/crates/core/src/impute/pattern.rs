//! Gap filling by searching for a recurring shape across all series.

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::impute::stats::interpolate_series;

/// z-normalises a window; constant windows are merely centred.
fn znorm(w: &[f64]) -> Vec<f64> {
    let n = w.len() as f64;
    let mean = w.iter().sum::<f64>() / n;
    let var = w.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let std = var.sqrt();
    if std == 0.0 {
        w.iter().map(|v| v - mean).collect()
    } else {
        w.iter().map(|v| (v - mean) / std).collect()
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

struct Gap {
    series: usize,
    start: usize,
    len: usize,
}

fn gaps_of(ds: &Dataset, i: usize) -> Vec<Gap> {
    let mut gaps = Vec::new();
    let mut j = 0;
    while j < ds.n_points() {
        if ds.is_missing(i, j) {
            let start = j;
            while j < ds.n_points() && ds.is_missing(i, j) {
                j += 1;
            }
            gaps.push(Gap { series: i, start, len: j - start });
        } else {
            j += 1;
        }
    }
    gaps
}

/// Fills each gap by matching the window of `ref_len` observed values that
/// precedes it against every fully observed window in the dataset, then
/// continuing the best match.
///
/// Windows are compared after z-normalisation; a candidate must be followed
/// by `gap_len` observed cells to donate a continuation. Ties go to the
/// earliest position, then the lowest series index. The continuation is
/// shifted so its start lines up with the reference window's last value:
/// fill[t] = donor[t] + (last reference value - last candidate-window value).
/// Gaps without a fully observed preceding window or without any candidate
/// fall back to linear interpolation. `ref_len` must be at least 2.
pub fn pattern_window(ds: &Dataset, ref_len: usize) -> Result<Dataset> {
    if ref_len < 2 {
        return Err(Error::Param(format!(
            "ref_len must be at least 2, got {ref_len}"
        )));
    }
    let mut values = ds.rows().to_vec();
    for i in 0..ds.n_series() {
        let obs = ds.observed_pairs(i);
        if values[i].iter().any(|v| v.is_nan()) && obs.is_empty() {
            return Err(Error::DegenerateSeries {
                series: i,
                msg: "no observed value to impute from".into(),
            });
        }
        for gap in gaps_of(ds, i) {
            match best_continuation(ds, &gap, ref_len) {
                Some(fill) => {
                    for (t, v) in fill.into_iter().enumerate() {
                        values[i][gap.start + t] = v;
                    }
                }
                None => {
                    let mut row = ds.series(i).to_vec();
                    interpolate_series(&mut row, &obs);
                    for t in gap.start..gap.start + gap.len {
                        values[i][t] = row[t];
                    }
                }
            }
        }
    }
    ds.with_values(values)
}

fn best_continuation(ds: &Dataset, gap: &Gap, ref_len: usize) -> Option<Vec<f64>> {
    let n = ds.n_points();
    if gap.start < ref_len {
        return None;
    }
    let ref_start = gap.start - ref_len;
    let window_observed = |series: usize, start: usize, len: usize| {
        (start..start + len).all(|j| !ds.is_missing(series, j))
    };
    if !window_observed(gap.series, ref_start, ref_len) {
        return None;
    }
    let reference: Vec<f64> = ds.series(gap.series)[ref_start..gap.start].to_vec();
    let ref_z = znorm(&reference);
    let ref_last = *reference.last().expect("ref_len >= 2");

    let mut best: Option<(f64, usize, usize)> = None; // (dist, start, series)
    for s in 0..ds.n_series() {
        if ref_len + gap.len > n {
            break;
        }
        for start in 0..=n - ref_len - gap.len {
            if s == gap.series && start == ref_start {
                continue; // the reference itself continues into the gap
            }
            if !window_observed(s, start, ref_len) || !window_observed(s, start + ref_len, gap.len)
            {
                continue;
            }
            let cand = &ds.series(s)[start..start + ref_len];
            let d = sq_dist(&ref_z, &znorm(cand));
            let better = match best {
                None => true,
                Some((bd, bstart, bs)) => {
                    d < bd || (d == bd && (start < bstart || (start == bstart && s < bs)))
                }
            };
            if better {
                best = Some((d, start, s));
            }
        }
    }
    let (_, start, s) = best?;
    let cand_last = ds.value(s, start + ref_len - 1);
    let offset = ref_last - cand_last;
    Some(
        (0..gap.len)
            .map(|t| ds.value(s, start + ref_len + t) + offset)
            .collect(),
    )
}
