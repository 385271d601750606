//! The fixed per-series feature catalogue used by the surrogate model.

use crate::dataset::Dataset;
use crate::error::{Error, Result};

/// Number of features extracted per series.
pub const N_FEATURES: usize = 12;

/// Feature names, index-aligned with the vectors produced here.
pub const FEATURE_NAMES: [&str; N_FEATURES] = [
    "mean",
    "variance",
    "skewness",
    "excess-kurtosis",
    "lag1-autocorrelation",
    "trend-r2",
    "mean-crossing-rate",
    "longest-constant-run-fraction",
    "spectral-entropy",
    "max-seasonal-autocorrelation",
    "diff-std-ratio",
    "missing-rate",
];

/// Minimum observed points needed to extract features from a series.
pub const MIN_OBSERVED: usize = 8;

fn population_var(v: &[f64], mean: f64) -> f64 {
    v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / v.len() as f64
}

fn autocorrelation(v: &[f64], mean: f64, var: f64, lag: usize) -> f64 {
    if var == 0.0 || lag >= v.len() {
        return 0.0;
    }
    let num: f64 = (0..v.len() - lag)
        .map(|t| (v[t] - mean) * (v[t + lag] - mean))
        .sum();
    // normalise by the overlap length so an exactly periodic signal scores
    // 1.0 at its period independent of series length
    num / (var * (v.len() - lag) as f64)
}

/// Normalised entropy of the positive-frequency power spectrum, in [0, 1].
/// Concentrated spectra (pure tones) give values near 0; flat spectra and
/// degenerate series give 1.
fn spectral_entropy(v: &[f64], mean: f64) -> f64 {
    let k = v.len();
    let bins = k / 2;
    if bins <= 1 {
        return 1.0;
    }
    let mut power = Vec::with_capacity(bins);
    for f in 1..=bins {
        let (mut re, mut im) = (0.0, 0.0);
        for (t, &x) in v.iter().enumerate() {
            let angle = -2.0 * std::f64::consts::PI * f as f64 * t as f64 / k as f64;
            re += (x - mean) * angle.cos();
            im += (x - mean) * angle.sin();
        }
        power.push(re * re + im * im);
    }
    let total: f64 = power.iter().sum();
    if total <= 1e-300 {
        return 1.0;
    }
    let entropy: f64 = power
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| {
            let q = p / total;
            -q * q.ln()
        })
        .sum();
    entropy / (bins as f64).ln()
}

/// Extracts the twelve features of one series.
///
/// All shape statistics are computed over the compacted observed values;
/// `missing-rate` is the masked fraction of the full series length. Series
/// with fewer than [`MIN_OBSERVED`] observed points are rejected. Constant
/// series use fixed conventions: zero for the moment ratios, correlations
/// and crossing rate, one for the constant-run fraction and the spectral
/// entropy.
pub fn series_features(ds: &Dataset, series: usize) -> Result<[f64; N_FEATURES]> {
    let v = ds.observed(series);
    let k = v.len();
    if k < MIN_OBSERVED {
        return Err(Error::Shape(format!(
            "series {series} has only {k} observed points; features need at least {MIN_OBSERVED}"
        )));
    }
    let n = ds.n_points();
    let mean = v.iter().sum::<f64>() / k as f64;
    let var = population_var(&v, mean);
    let std = var.sqrt();

    let (skewness, excess_kurtosis) = if var == 0.0 {
        (0.0, 0.0)
    } else {
        let m3 = v.iter().map(|x| (x - mean).powi(3)).sum::<f64>() / k as f64;
        let m4 = v.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / k as f64;
        (m3 / std.powi(3), m4 / (var * var) - 3.0)
    };

    let lag1 = autocorrelation(&v, mean, var, 1);

    let trend_r2 = if var == 0.0 {
        0.0
    } else {
        let t_mean = (k - 1) as f64 / 2.0;
        let t_var = (0..k).map(|t| (t as f64 - t_mean).powi(2)).sum::<f64>() / k as f64;
        let cov = v
            .iter()
            .enumerate()
            .map(|(t, &x)| (t as f64 - t_mean) * (x - mean))
            .sum::<f64>()
            / k as f64;
        (cov * cov) / (var * t_var)
    };

    let crossings = v
        .windows(2)
        .filter(|w| (w[0] - mean) * (w[1] - mean) < 0.0)
        .count();
    let mean_crossing_rate = crossings as f64 / (k - 1) as f64;

    let mut longest_run = 1usize;
    let mut run = 1usize;
    for w in v.windows(2) {
        if w[1] == w[0] {
            run += 1;
            longest_run = longest_run.max(run);
        } else {
            run = 1;
        }
    }
    let longest_constant_run_fraction = longest_run as f64 / k as f64;

    let entropy = if var == 0.0 { 1.0 } else { spectral_entropy(&v, mean) };

    let max_seasonal = if var == 0.0 {
        0.0
    } else {
        (2..=k / 2)
            .map(|lag| autocorrelation(&v, mean, var, lag))
            .fold(f64::NEG_INFINITY, f64::max)
    };

    let diff_std_ratio = if var == 0.0 {
        0.0
    } else {
        let d: Vec<f64> = v.windows(2).map(|w| w[1] - w[0]).collect();
        let d_mean = d.iter().sum::<f64>() / d.len() as f64;
        population_var(&d, d_mean).sqrt() / std
    };

    let missing_rate = (n - k) as f64 / n as f64;

    Ok([
        mean,
        var,
        skewness,
        excess_kurtosis,
        lag1,
        trend_r2,
        mean_crossing_rate,
        longest_constant_run_fraction,
        entropy,
        max_seasonal,
        diff_std_ratio,
        missing_rate,
    ])
}

/// Feature matrix with one row per series.
pub fn dataset_features(ds: &Dataset) -> Result<Vec<[f64; N_FEATURES]>> {
    (0..ds.n_series()).map(|i| series_features(ds, i)).collect()
}

/// Mean of the per-series feature vectors, describing the dataset as a whole.
pub fn aggregate_features(ds: &Dataset) -> Result<[f64; N_FEATURES]> {
    let rows = dataset_features(ds)?;
    let mut agg = [0.0; N_FEATURES];
    for row in &rows {
        for (a, x) in agg.iter_mut().zip(row) {
            *a += x;
        }
    }
    for a in agg.iter_mut() {
        *a /= rows.len() as f64;
    }
    Ok(agg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn feats(row: Vec<f64>) -> [f64; N_FEATURES] {
        series_features(&Dataset::new(vec![row]).unwrap(), 0).unwrap()
    }

    fn idx(name: &str) -> usize {
        FEATURE_NAMES.iter().position(|&n| n == name).unwrap()
    }

    #[test]
    fn constant_series_conventions() {
        let f = feats(vec![3.0; 20]);
        assert_eq!(f[idx("mean")], 3.0);
        assert_eq!(f[idx("variance")], 0.0);
        assert_eq!(f[idx("skewness")], 0.0);
        assert_eq!(f[idx("excess-kurtosis")], 0.0);
        assert_eq!(f[idx("lag1-autocorrelation")], 0.0);
        assert_eq!(f[idx("trend-r2")], 0.0);
        assert_eq!(f[idx("mean-crossing-rate")], 0.0);
        assert_eq!(f[idx("longest-constant-run-fraction")], 1.0);
        assert_eq!(f[idx("spectral-entropy")], 1.0);
        assert_eq!(f[idx("max-seasonal-autocorrelation")], 0.0);
        assert_eq!(f[idx("diff-std-ratio")], 0.0);
        assert_eq!(f[idx("missing-rate")], 0.0);
    }

    #[test]
    fn linear_ramp_has_unit_trend() {
        let f = feats((0..50).map(|t| 2.0 * t as f64 + 1.0).collect());
        assert!((f[idx("trend-r2")] - 1.0).abs() < 1e-12);
        assert!(f[idx("mean-crossing-rate")] < 0.1);
    }

    #[test]
    fn alternating_series_crosses_every_step() {
        let f = feats((0..40).map(|t| if t % 2 == 0 { 1.0 } else { -1.0 }).collect());
        assert_eq!(f[idx("mean-crossing-rate")], 1.0);
        assert!(f[idx("lag1-autocorrelation")] < -0.9);
    }

    #[test]
    fn pure_tone_concentrates_spectrum_and_seasonal_peak() {
        let row: Vec<f64> = (0..64)
            .map(|t| (2.0 * std::f64::consts::PI * t as f64 / 8.0).sin())
            .collect();
        let f = feats(row);
        assert!(f[idx("spectral-entropy")] < 0.1, "{}", f[idx("spectral-entropy")]);
        assert!(f[idx("max-seasonal-autocorrelation")] > 0.9);
    }

    #[test]
    fn skewness_sign_matches_tail() {
        let mut right = vec![0.0; 30];
        right.extend([10.0, 12.0]); // heavy right tail
        let f = feats(right);
        assert!(f[idx("skewness")] > 1.0);
    }

    #[test]
    fn missing_rate_counts_mask() {
        let mut row: Vec<f64> = (0..20).map(|t| t as f64).collect();
        row[3] = f64::NAN;
        row[4] = f64::NAN;
        let ds = Dataset::new(vec![row]).unwrap();
        let f = series_features(&ds, 0).unwrap();
        assert!((f[idx("missing-rate")] - 0.1).abs() < 1e-12);
    }

    #[test]
    fn too_few_observed_rejected() {
        let mut row = vec![f64::NAN; 20];
        for (t, v) in row.iter_mut().enumerate().take(7) {
            *v = t as f64;
        }
        let ds = Dataset::new(vec![row]).unwrap();
        assert!(matches!(series_features(&ds, 0), Err(Error::Shape(_))));
    }

    #[test]
    fn aggregate_is_mean_of_rows() {
        let ds = Dataset::new(vec![
            (0..30).map(|t| t as f64).collect(),
            (0..30).map(|t| (30 - t) as f64).collect(),
        ])
        .unwrap();
        let rows = dataset_features(&ds).unwrap();
        let agg = aggregate_features(&ds).unwrap();
        for i in 0..N_FEATURES {
            assert!((agg[i] - 0.5 * (rows[0][i] + rows[1][i])).abs() < 1e-12);
        }
    }

    #[test]
    fn white_noise_spectrum_is_flat() {
        use rand::Rng;
        let mut rng = crate::seed::rng_from_seed(8);
        let row: Vec<f64> = (0..256).map(|_| rng.random_range(-1.0..1.0)).collect();
        let f = feats(row);
        assert!(f[idx("spectral-entropy")] > 0.8);
    }
}
