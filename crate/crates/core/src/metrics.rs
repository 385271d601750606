//! Masked scoring of imputation quality.
//!
//! All metrics compare truth and reconstruction only at the cells named by a
//! [`MaskDelta`], pooled across series. Cells outside the delta never affect
//! any score.

use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, MaskDelta};
use crate::error::{Error, Result};

/// Number of equal-width bins used by [`mutual_information`].
pub const MI_BINS: usize = 10;

/// Pooled metric bundle over one reconstruction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub rmse: f64,
    pub mae: f64,
    pub pearson: f64,
    pub mutual_information: f64,
}

/// Pulls the (truth, reconstructed) value pairs at the delta cells.
///
/// Errors: out-of-range positions or truth missing at a scored cell map to
/// `State`; a reconstruction that is still missing there maps to `State`;
/// an empty delta maps to `EmptyMask`.
pub fn masked_pairs(
    truth: &Dataset,
    imputed: &Dataset,
    target: &MaskDelta,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if target.positions.is_empty() {
        return Err(Error::EmptyMask);
    }
    target.check_bounds(truth.n_series(), truth.n_points())?;
    target.check_bounds(imputed.n_series(), imputed.n_points())?;
    let mut xs = Vec::with_capacity(target.positions.len());
    let mut ys = Vec::with_capacity(target.positions.len());
    for &(i, j) in &target.positions {
        if truth.is_missing(i, j) {
            return Err(Error::State(format!(
                "truth is missing at scored cell ({i}, {j})"
            )));
        }
        if imputed.is_missing(i, j) {
            return Err(Error::State(format!(
                "reconstruction is missing at scored cell ({i}, {j})"
            )));
        }
        xs.push(truth.value(i, j));
        ys.push(imputed.value(i, j));
    }
    Ok((xs, ys))
}

/// Root mean squared error between paired vectors.
pub fn rmse(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pairs(x, y)?;
    let n = x.len() as f64;
    let sum: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok((sum / n).sqrt())
}

/// Mean absolute error between paired vectors.
pub fn mae(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pairs(x, y)?;
    let n = x.len() as f64;
    Ok(x.iter().zip(y).map(|(a, b)| (a - b).abs()).sum::<f64>() / n)
}

/// Pearson correlation; errors with `DegenerateMetric` when either vector has
/// zero variance.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pairs(x, y)?;
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    let mut sxy = 0.0;
    for (a, b) in x.iter().zip(y) {
        let dx = a - mx;
        let dy = b - my;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::DegenerateMetric(
            "pearson undefined for zero-variance input".into(),
        ));
    }
    Ok(sxy / (sxx.sqrt() * syy.sqrt()))
}

/// Discrete mutual information in nats over [`MI_BINS`] equal-width bins.
///
/// Each vector is binned over its own [min, max] range; a zero-width range
/// collapses to a single bin, which yields zero information.
pub fn mutual_information(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pairs(x, y)?;
    let bx = bin_indices(x, MI_BINS);
    let by = bin_indices(y, MI_BINS);
    let n = x.len() as f64;
    let mut joint = vec![[0usize; MI_BINS]; MI_BINS];
    let mut px = [0usize; MI_BINS];
    let mut py = [0usize; MI_BINS];
    for (&a, &b) in bx.iter().zip(&by) {
        joint[a][b] += 1;
        px[a] += 1;
        py[b] += 1;
    }
    let mut mi = 0.0;
    for a in 0..MI_BINS {
        for b in 0..MI_BINS {
            let c = joint[a][b];
            if c == 0 {
                continue;
            }
            let pxy = c as f64 / n;
            let pa = px[a] as f64 / n;
            let pb = py[b] as f64 / n;
            mi += pxy * (pxy / (pa * pb)).ln();
        }
    }
    Ok(mi.max(0.0))
}

fn bin_indices(v: &[f64], bins: usize) -> Vec<usize> {
    let min = v.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let width = max - min;
    v.iter()
        .map(|&x| {
            if width == 0.0 {
                0
            } else {
                (((x - min) / width) * bins as f64).floor().min(bins as f64 - 1.0) as usize
            }
        })
        .collect()
}

fn check_pairs(x: &[f64], y: &[f64]) -> Result<()> {
    if x.is_empty() {
        return Err(Error::EmptyMask);
    }
    if x.len() != y.len() {
        return Err(Error::Shape(format!(
            "paired vectors differ in length: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    Ok(())
}

/// All pooled metrics of a reconstruction against the truth at the delta
/// cells.
pub fn score(truth: &Dataset, imputed: &Dataset, target: &MaskDelta) -> Result<Scores> {
    let (xs, ys) = masked_pairs(truth, imputed, target)?;
    Ok(Scores {
        rmse: rmse(&xs, &ys)?,
        mae: mae(&xs, &ys)?,
        pearson: pearson(&xs, &ys)?,
        mutual_information: mutual_information(&xs, &ys)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::DeltaSource;
    use crate::seed::rng_from_seed;
    use rand::Rng;

    #[test]
    fn rmse_hand_value() {
        let v = rmse(&[0.0, 0.0], &[3.0, 4.0]).unwrap();
        assert!((v - 3.5355339059327378).abs() < 1e-12);
    }

    #[test]
    fn mae_hand_value() {
        let v = mae(&[0.0, 0.0], &[3.0, 4.0]).unwrap();
        assert!((v - 3.5).abs() < 1e-12);
    }

    #[test]
    fn rmse_dominates_mae() {
        let mut rng = rng_from_seed(11);
        for _ in 0..200 {
            let n = rng.random_range(2..50);
            let x: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
            let y: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
            let r = rmse(&x, &y).unwrap();
            let m = mae(&x, &y).unwrap();
            assert!(r >= m - 1e-12, "rmse {r} < mae {m}");
        }
    }

    #[test]
    fn pearson_perfect_and_inverse() {
        let x: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| 3.0 * v + 1.0).collect();
        let z: Vec<f64> = x.iter().map(|v| -2.0 * v).collect();
        assert!((pearson(&x, &y).unwrap() - 1.0).abs() < 1e-12);
        assert!((pearson(&x, &z).unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn pearson_zero_variance_errors() {
        let x = [1.0, 1.0, 1.0];
        let y = [0.0, 1.0, 2.0];
        assert!(matches!(pearson(&x, &y), Err(Error::DegenerateMetric(_))));
        assert!(matches!(pearson(&y, &x), Err(Error::DegenerateMetric(_))));
    }

    #[test]
    fn mi_of_uniform_with_itself_near_ln_bins() {
        let mut rng = rng_from_seed(5);
        let x: Vec<f64> = (0..1000).map(|_| rng.random_range(0.0..1.0)).collect();
        let mi = mutual_information(&x, &x).unwrap();
        assert!((mi - (10f64).ln()).abs() < 0.05, "mi = {mi}");
    }

    #[test]
    fn mi_independent_near_zero_and_nonnegative() {
        let mut rng = rng_from_seed(6);
        let x: Vec<f64> = (0..2000).map(|_| rng.random_range(0.0..1.0)).collect();
        let y: Vec<f64> = (0..2000).map(|_| rng.random_range(0.0..1.0)).collect();
        let mi = mutual_information(&x, &y).unwrap();
        assert!(mi >= 0.0);
        assert!(mi < 0.1, "mi = {mi}");
    }

    #[test]
    fn mi_symmetry() {
        let mut rng = rng_from_seed(7);
        let x: Vec<f64> = (0..300).map(|_| rng.random_range(0.0..1.0)).collect();
        let y: Vec<f64> = x.iter().map(|v| v * v + 0.1).collect();
        let a = mutual_information(&x, &y).unwrap();
        let b = mutual_information(&y, &x).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn mi_constant_vector_is_zero() {
        let x = [2.0; 50];
        let y: Vec<f64> = (0..50).map(|i| i as f64).collect();
        assert_eq!(mutual_information(&x, &y).unwrap(), 0.0);
    }

    #[test]
    fn score_reads_only_delta_cells() {
        let truth = Dataset::new(vec![vec![1.0, 2.0, 3.0, 4.0], vec![5.0, 6.0, 7.0, 8.0]]).unwrap();
        let delta = MaskDelta::new(vec![(0, 1), (1, 2)], DeltaSource::Contaminated);
        let imputed_a = truth
            .with_values(vec![vec![1.0, 2.5, 3.0, 4.0], vec![5.0, 6.0, 7.5, 8.0]])
            .unwrap();
        // same delta cells, garbage elsewhere
        let imputed_b = truth
            .with_values(vec![vec![99.0, 2.5, -7.0, 0.0], vec![0.0, -1.0, 7.5, 42.0]])
            .unwrap();
        let sa = score(&truth, &imputed_a, &delta).unwrap();
        let sb = score(&truth, &imputed_b, &delta).unwrap();
        assert_eq!(sa, sb);
        assert!((sa.rmse - 0.5).abs() < 1e-12);
        assert!((sa.mae - 0.5).abs() < 1e-12);
    }

    #[test]
    fn empty_delta_errors() {
        let truth = Dataset::new(vec![vec![1.0, 2.0, 3.0]]).unwrap();
        let delta = MaskDelta::new(vec![], DeltaSource::Contaminated);
        assert!(matches!(
            score(&truth, &truth, &delta),
            Err(Error::EmptyMask)
        ));
    }

    #[test]
    fn missing_truth_at_scored_cell_errors() {
        let truth = Dataset::new(vec![vec![1.0, f64::NAN, 3.0]]).unwrap();
        let fixed = Dataset::new(vec![vec![1.0, 2.0, 3.0]]).unwrap();
        let delta = MaskDelta::new(vec![(0, 1)], DeltaSource::Contaminated);
        assert!(matches!(
            score(&truth, &fixed, &delta),
            Err(Error::State(_))
        ));
    }
}
