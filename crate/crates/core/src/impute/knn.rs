//! Cross-series k-nearest-neighbour imputation.

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::impute::stats::interpolate_series;

/// Distance between two series over the columns where both are observed,
/// normalised by the overlap size so sparse overlaps stay comparable:
/// sqrt(sum((a - b)^2) / overlap). `None` when no column overlaps.
fn overlap_distance(ds: &Dataset, a: usize, b: usize) -> Option<f64> {
    let mut sum = 0.0;
    let mut count = 0usize;
    for j in 0..ds.n_points() {
        if !ds.is_missing(a, j) && !ds.is_missing(b, j) {
            let d = ds.value(a, j) - ds.value(b, j);
            sum += d * d;
            count += 1;
        }
    }
    (count > 0).then(|| (sum / count as f64).sqrt())
}

/// Fills missing cells from the `k` nearest series.
///
/// Neighbours are ranked by overlap-normalised Euclidean distance, ties
/// broken by lower series index. At each missing column the neighbours
/// observed there contribute with weight 1/distance; zero-distance
/// neighbours, when present, are averaged uniformly on their own. Columns
/// where no chosen neighbour is observed fall back to linear interpolation
/// within the series. `k` must satisfy 1 <= k < M.
pub fn knn_impute(ds: &Dataset, k: usize) -> Result<Dataset> {
    let m = ds.n_series();
    if k < 1 || k >= m {
        return Err(Error::Param(format!(
            "k must satisfy 1 <= k < {m} (number of series), got {k}"
        )));
    }
    let mut values = ds.rows().to_vec();
    for i in 0..m {
        if !values[i].iter().any(|v| v.is_nan()) {
            continue;
        }
        let obs = ds.observed_pairs(i);
        if obs.is_empty() {
            return Err(Error::DegenerateSeries {
                series: i,
                msg: "no observed value to impute from".into(),
            });
        }
        let mut neighbours: Vec<(f64, usize)> = (0..m)
            .filter(|&j| j != i)
            .filter_map(|j| overlap_distance(ds, i, j).map(|d| (d, j)))
            .collect();
        neighbours.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
        neighbours.truncate(k);

        let mut fallback: Option<Vec<f64>> = None;
        for j in 0..ds.n_points() {
            if !ds.is_missing(i, j) {
                continue;
            }
            let at_column: Vec<(f64, f64)> = neighbours
                .iter()
                .filter(|&&(_, nb)| !ds.is_missing(nb, j))
                .map(|&(d, nb)| (d, ds.value(nb, j)))
                .collect();
            values[i][j] = if at_column.is_empty() {
                let filled = fallback.get_or_insert_with(|| {
                    let mut row = ds.series(i).to_vec();
                    interpolate_series(&mut row, &obs);
                    row
                });
                filled[j]
            } else if at_column.iter().any(|&(d, _)| d == 0.0) {
                let zeros: Vec<f64> = at_column
                    .iter()
                    .filter(|&&(d, _)| d == 0.0)
                    .map(|&(_, v)| v)
                    .collect();
                zeros.iter().sum::<f64>() / zeros.len() as f64
            } else {
                let wsum: f64 = at_column.iter().map(|&(d, _)| 1.0 / d).sum();
                at_column.iter().map(|&(d, v)| v / d).sum::<f64>() / wsum
            };
        }
    }
    ds.with_values(values)
}
