//! Per-series statistical baselines.

use crate::dataset::Dataset;
use crate::error::{Error, Result};

fn observed_of(ds: &Dataset, series: usize) -> Result<Vec<(usize, f64)>> {
    let obs = ds.observed_pairs(series);
    if obs.is_empty() {
        return Err(Error::DegenerateSeries {
            series,
            msg: "no observed value to impute from".into(),
        });
    }
    Ok(obs)
}

/// Replaces each missing cell with the mean of its series' observed values.
pub fn mean_impute(ds: &Dataset) -> Result<Dataset> {
    let mut values = ds.rows().to_vec();
    for i in 0..ds.n_series() {
        if !values[i].iter().any(|v| v.is_nan()) {
            continue;
        }
        let obs = observed_of(ds, i)?;
        let mean = obs.iter().map(|&(_, v)| v).sum::<f64>() / obs.len() as f64;
        for v in values[i].iter_mut() {
            if v.is_nan() {
                *v = mean;
            }
        }
    }
    ds.with_values(values)
}

/// Fills one series in place: interior gaps linearly between the nearest
/// observed neighbours, leading and trailing gaps by constant extension.
pub fn interpolate_series(row: &mut [f64], observed: &[(usize, f64)]) {
    let (first_j, first_v) = observed[0];
    let (last_j, last_v) = *observed.last().expect("non-empty observed");
    for j in 0..first_j {
        row[j] = first_v;
    }
    for j in last_j + 1..row.len() {
        row[j] = last_v;
    }
    for w in observed.windows(2) {
        let (a_j, a_v) = w[0];
        let (b_j, b_v) = w[1];
        if b_j - a_j <= 1 {
            continue;
        }
        let span = (b_j - a_j) as f64;
        for j in a_j + 1..b_j {
            let t = (j - a_j) as f64 / span;
            row[j] = a_v + t * (b_v - a_v);
        }
    }
}

/// Linear interpolation between the nearest observed neighbours of each gap;
/// gaps touching either end extend the nearest observed value.
pub fn linear_interp(ds: &Dataset) -> Result<Dataset> {
    let mut values = ds.rows().to_vec();
    for i in 0..ds.n_series() {
        if !values[i].iter().any(|v| v.is_nan()) {
            continue;
        }
        let obs = observed_of(ds, i)?;
        interpolate_series(&mut values[i], &obs);
    }
    ds.with_values(values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;

    fn ds(rows: Vec<Vec<f64>>) -> Dataset {
        Dataset::new(rows).unwrap()
    }

    #[test]
    fn mean_uses_observed_only() {
        let d = ds(vec![vec![1.0, f64::NAN, 3.0, f64::NAN]]);
        let out = mean_impute(&d).unwrap();
        assert_eq!(out.value(0, 1), 2.0);
        assert_eq!(out.value(0, 3), 2.0);
        assert_eq!(out.value(0, 0), 1.0);
    }

    #[test]
    fn linear_interior_gap() {
        let d = ds(vec![vec![0.0, f64::NAN, f64::NAN, 3.0]]);
        let out = linear_interp(&d).unwrap();
        assert!((out.value(0, 1) - 1.0).abs() < 1e-12);
        assert!((out.value(0, 2) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn linear_edges_extend_constant() {
        let d = ds(vec![vec![f64::NAN, f64::NAN, 5.0, 7.0, f64::NAN]]);
        let out = linear_interp(&d).unwrap();
        assert_eq!(out.value(0, 0), 5.0);
        assert_eq!(out.value(0, 1), 5.0);
        assert_eq!(out.value(0, 4), 7.0);
    }

    #[test]
    fn fully_missing_series_errors() {
        let d = ds(vec![vec![1.0, 2.0, 3.0], vec![f64::NAN, f64::NAN, f64::NAN]]);
        assert!(matches!(
            mean_impute(&d),
            Err(Error::DegenerateSeries { series: 1, .. })
        ));
        assert!(matches!(
            linear_interp(&d),
            Err(Error::DegenerateSeries { series: 1, .. })
        ));
    }

    #[test]
    fn untouched_series_passes_through() {
        let d = ds(vec![vec![1.5, 2.5, 3.5], vec![1.0, f64::NAN, 3.0]]);
        let out = linear_interp(&d).unwrap();
        assert_eq!(out.series(0), vec![1.5, 2.5, 3.5]);
    }
}
