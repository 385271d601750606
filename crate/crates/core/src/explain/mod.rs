//! Post-hoc explanation of imputation error.
//!
//! An algorithm is explained in three steps: build a training table by
//! contaminating the reference data at several rates and recording the
//! resulting error, fit a bagged-tree surrogate from dataset features to
//! that error, then attribute the surrogate's prediction on the dataset of
//! interest to the individual features with exact Shapley values.

pub mod features;
pub mod shapley;
pub mod surrogate;

pub use features::{aggregate_features, dataset_features, series_features, FEATURE_NAMES, N_FEATURES};
pub use shapley::{shapley_exact, shapley_sampled, Regressor, ShapleyValues, EXACT_MAX_FEATURES};
pub use surrogate::{train_surrogate, Surrogate, TrainingTable, MAX_DEPTH, MIN_TRAIN_ROWS, N_TREES};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::gengap::{contaminate, ContaminationSpec};
use crate::impute::{ParamMap, Registry};
use crate::metrics::{masked_pairs, rmse};
use crate::seed::{combine_seed, rng_from_seed};

/// Background rows used for attribution are capped at this many.
pub const MAX_BACKGROUND: usize = 64;

/// Builds the surrogate's training table for one algorithm.
///
/// Rows come from `n_runs` independent repetitions of every rate in
/// `rate_grid`. Each row contaminates `truth` with a fresh mono-block
/// pattern hitting a randomly drawn fraction of the series (between 0.3 and
/// 1), imputes it, and pairs the contaminated dataset's aggregate features
/// with the masked RMSE.
pub fn build_training_set(
    registry: &Registry,
    truth: &Dataset,
    algorithm: &str,
    params: &ParamMap,
    rate_grid: &[f64],
    n_runs: usize,
    seed: u64,
) -> Result<TrainingTable> {
    if rate_grid.is_empty() {
        return Err(Error::Spec("empty rate grid".into()));
    }
    if n_runs == 0 {
        return Err(Error::Spec("n_runs must be at least 1".into()));
    }
    let mut rows = Vec::with_capacity(n_runs * rate_grid.len());
    let mut targets = Vec::with_capacity(n_runs * rate_grid.len());
    let mut row_index: u64 = 0;
    for _ in 0..n_runs {
        for &rate in rate_grid {
            let row_seed = combine_seed(&[&seed.to_le_bytes(), &row_index.to_le_bytes()]);
            let fraction = rng_from_seed(row_seed).random_range(0.3..=1.0);
            let spec = ContaminationSpec::mono(rate, row_seed).with_series_fraction(fraction);
            let (holed, delta) = contaminate(truth, &spec)?;
            let run = registry.run(&holed, algorithm, params, row_seed)?;
            let (xs, ys) = masked_pairs(truth, &run.imputed, &delta)?;
            rows.push(aggregate_features(&holed)?);
            targets.push(rmse(&xs, &ys)?);
            row_index += 1;
        }
    }
    Ok(TrainingTable { rows, targets })
}

/// Everything the explanation stage produces for one algorithm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Explanation {
    pub algorithm: String,
    pub feature_names: Vec<String>,
    /// Feature vector of the explained dataset.
    pub x: Vec<f64>,
    pub shapley: ShapleyValues,
    /// Training fit of the surrogate; diagnostic only.
    pub train_r2: f64,
    pub n_training_rows: usize,
}

/// Explains which characteristics of `input` drive `algorithm`'s error.
///
/// `truth` supplies the fully observed data the training table is built
/// from; `input` is the dataset whose feature vector gets attributed (in a
/// pipeline, the contaminated matrix). The background is the training
/// table itself, subsampled to [`MAX_BACKGROUND`] rows when larger.
#[allow(clippy::too_many_arguments)]
pub fn explain_algorithm(
    registry: &Registry,
    truth: &Dataset,
    input: &Dataset,
    algorithm: &str,
    params: &ParamMap,
    rate_grid: &[f64],
    n_runs: usize,
    seed: u64,
) -> Result<Explanation> {
    let table = build_training_set(registry, truth, algorithm, params, rate_grid, n_runs, seed)?;
    let surrogate = train_surrogate(&table, combine_seed(&[&seed.to_le_bytes(), b"surrogate"]))?;
    let x = aggregate_features(input)?;

    let mut background: Vec<Vec<f64>> = table.rows.iter().map(|r| r.to_vec()).collect();
    if background.len() > MAX_BACKGROUND {
        let mut rng = rng_from_seed(combine_seed(&[&seed.to_le_bytes(), b"background"]));
        let mut picked = rand::seq::index::sample(&mut rng, background.len(), MAX_BACKGROUND)
            .into_vec();
        picked.sort_unstable();
        background = picked.into_iter().map(|i| background[i].clone()).collect();
    }

    let shapley = shapley_exact(&surrogate, &x, &background)?;
    Ok(Explanation {
        algorithm: algorithm.to_string(),
        feature_names: FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
        x: x.to_vec(),
        shapley,
        train_r2: surrogate.train_r2,
        n_training_rows: table.rows.len(),
    })
}
