//! Low-rank matrix completion imputers.

use nalgebra::{DMatrix, DVector};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::impute::stats::{linear_interp, mean_impute};

/// Greedy search for the sign vector z in {-1, +1}^M maximising ||X^T z||.
///
/// Starts from all ones and flips the single entry with the best gain until
/// no flip improves the norm. Flipping z_i changes ||v||^2 by
/// 4 (||x_i||^2 - z_i <v, x_i>) where v = X^T z and x_i is row i.
fn best_sign_vector(x: &DMatrix<f64>) -> DVector<f64> {
    let m = x.nrows();
    let mut z = DVector::from_element(m, 1.0);
    let mut v: DVector<f64> = x.transpose() * &z;
    let row_sq: Vec<f64> = (0..m).map(|i| x.row(i).norm_squared()).collect();
    for _ in 0..64 * m + 128 {
        let mut best: Option<(usize, f64)> = None;
        for i in 0..m {
            let dot = x.row(i).transpose().dot(&v);
            let gain = 4.0 * (row_sq[i] - z[i] * dot);
            if best.map_or(true, |(_, g)| gain > g) {
                best = Some((i, gain));
            }
        }
        let (i, gain) = best.expect("at least one row");
        if gain <= 1e-12 * (1.0 + v.norm_squared()) {
            break;
        }
        v -= x.row(i).transpose() * (2.0 * z[i]);
        z[i] = -z[i];
    }
    z
}

fn cd_truncate(x: &DMatrix<f64>, rank: usize) -> DMatrix<f64> {
    let (m, n) = x.shape();
    let mut residual = x.clone();
    let mut recon = DMatrix::zeros(m, n);
    for _ in 0..rank {
        let z = best_sign_vector(&residual);
        let mut v: DVector<f64> = residual.transpose() * &z;
        let norm = v.norm();
        if norm < 1e-12 {
            break;
        }
        v /= norm;
        let c: DVector<f64> = &residual * &v;
        let outer = &c * v.transpose();
        recon += &outer;
        residual -= &outer;
    }
    recon
}

/// Rank-truncated centroid decomposition reconstruction of a complete
/// matrix, rows as series. Exact when `rank` reaches the matrix rank.
pub fn centroid_reconstruct(values: &[Vec<f64>], rank: usize) -> Result<Vec<Vec<f64>>> {
    if values.is_empty() || values[0].is_empty() {
        return Err(Error::Shape("empty matrix".into()));
    }
    let m = values.len();
    let n = values[0].len();
    if rank < 1 || rank > m.min(n) {
        return Err(Error::Param(format!(
            "rank must lie in [1, {}], got {rank}",
            m.min(n)
        )));
    }
    let flat: Vec<f64> = values.iter().flatten().cloned().collect();
    let x = DMatrix::from_row_slice(m, n, &flat);
    let recon = cd_truncate(&x, rank);
    Ok((0..m).map(|i| recon.row(i).iter().cloned().collect()).collect())
}

fn check_iter_params(eps: f64, max_iter: u64) -> Result<()> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::Param(format!("eps must be positive, got {eps}")));
    }
    if max_iter < 1 {
        return Err(Error::Param("max_iter must be at least 1".into()));
    }
    Ok(())
}

fn to_matrix(ds: &Dataset) -> DMatrix<f64> {
    let flat: Vec<f64> = ds.rows().iter().flatten().cloned().collect();
    DMatrix::from_row_slice(ds.n_series(), ds.n_points(), &flat)
}

/// Writes the reconstruction back over the missing cells only and returns
/// the Frobenius norm of the change restricted to those cells.
fn update_missing(ds: &Dataset, x: &mut DMatrix<f64>, recon: &DMatrix<f64>) -> f64 {
    let mut change_sq = 0.0;
    for i in 0..ds.n_series() {
        for j in 0..ds.n_points() {
            if ds.is_missing(i, j) {
                let d = recon[(i, j)] - x[(i, j)];
                change_sq += d * d;
                x[(i, j)] = recon[(i, j)];
            }
        }
    }
    change_sq.sqrt()
}

fn from_matrix(ds: &Dataset, x: &DMatrix<f64>) -> Result<Dataset> {
    let mut values = ds.rows().to_vec();
    for i in 0..ds.n_series() {
        for j in 0..ds.n_points() {
            if ds.is_missing(i, j) {
                values[i][j] = x[(i, j)];
            }
        }
    }
    ds.with_values(values)
}

/// Iterative centroid-decomposition completion.
///
/// Missing cells start at their linear-interpolation estimate; each round
/// replaces them with the rank-truncated centroid reconstruction of the
/// current matrix. Stops when the Frobenius change over missing cells drops
/// below `eps` or after `max_iter` rounds. Returns the completed dataset and
/// the number of rounds run.
pub fn cdrec(ds: &Dataset, rank: usize, eps: f64, max_iter: u64) -> Result<(Dataset, u64)> {
    let limit = ds.n_series().min(ds.n_points());
    if rank < 1 || rank > limit {
        return Err(Error::Param(format!(
            "rank must lie in [1, {limit}], got {rank}"
        )));
    }
    check_iter_params(eps, max_iter)?;
    let mut x = to_matrix(&linear_interp(ds)?);
    let mut iterations = 0;
    for _ in 0..max_iter {
        iterations += 1;
        let recon = cd_truncate(&x, rank);
        if update_missing(ds, &mut x, &recon) < eps {
            break;
        }
    }
    Ok((from_matrix(ds, &x)?, iterations))
}

/// Iterative SVD completion with soft-thresholded singular values.
///
/// Missing cells start at the series mean. Each round takes the SVD of the
/// current matrix, shrinks every singular value by `shrinkage` (clamping at
/// zero), reconstructs, and rewrites the missing cells. `shrinkage` defaults
/// to [`crate::impute::DEFAULT_SHRINKAGE_FACTOR`] times the largest singular
/// value of the initialised matrix. Returns the completed dataset, rounds
/// run, and the shrinkage actually used.
pub fn soft_svd(
    ds: &Dataset,
    shrinkage: Option<f64>,
    eps: f64,
    max_iter: u64,
) -> Result<(Dataset, u64, f64)> {
    check_iter_params(eps, max_iter)?;
    if let Some(s) = shrinkage {
        if !(s >= 0.0 && s.is_finite()) {
            return Err(Error::Param(format!(
                "shrinkage must be non-negative, got {s}"
            )));
        }
    }
    let mut x = to_matrix(&mean_impute(ds)?);
    let sigma1 = x
        .clone()
        .svd(false, false)
        .singular_values
        .max();
    let lambda = shrinkage.unwrap_or(crate::impute::DEFAULT_SHRINKAGE_FACTOR * sigma1);
    let mut iterations = 0;
    for _ in 0..max_iter {
        iterations += 1;
        let svd = x.clone().svd(true, true);
        let u = svd.u.expect("u requested");
        let v_t = svd.v_t.expect("v_t requested");
        let shrunk = svd.singular_values.map(|s| (s - lambda).max(0.0));
        let recon = &u * DMatrix::from_diagonal(&shrunk) * &v_t;
        if update_missing(ds, &mut x, &recon) < eps {
            break;
        }
    }
    Ok((from_matrix(ds, &x)?, iterations, lambda))
}
