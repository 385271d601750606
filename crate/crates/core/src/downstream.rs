//! Downstream forecasting evaluation: does repairing the training window
//! actually help a forecaster?

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::gengap::{contaminate, ContaminationSpec};
use crate::impute::{ParamMap, Registry};
use crate::metrics::mae;

/// Row label for the forecaster fitted on the uncontaminated training data.
pub const ORACLE_NAME: &str = "__oracle__";
/// Row label for the forecaster fitted on the mean-imputed training data,
/// the cheapest repair any algorithm has to beat.
pub const BASELINE_NAME: &str = "__baseline__";

pub const DEFAULT_SPLIT: f64 = 0.8;

/// Default forecast horizon: min(20, floor(0.1 * N)).
pub fn default_horizon(n_points: usize) -> usize {
    20.min(n_points / 10)
}

/// Forecasting model family and its hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum Forecaster {
    /// Repeats the last training value.
    NaiveLast,
    /// Repeats the last full season.
    SeasonalNaive { period: usize },
    /// Simple exponential smoothing, flat forecast from the final level.
    Ses { alpha: f64 },
    /// Autoregression of the given order, fitted by Yule-Walker.
    Ar { order: usize },
}

impl Forecaster {
    pub fn label(&self) -> &'static str {
        match self {
            Forecaster::NaiveLast => "naive-last",
            Forecaster::SeasonalNaive { .. } => "seasonal-naive",
            Forecaster::Ses { .. } => "ses",
            Forecaster::Ar { .. } => "ar",
        }
    }
}

/// Minimum training length for any forecaster.
pub const MIN_TRAIN: usize = 8;

enum FittedModel {
    NaiveLast { last: f64 },
    SeasonalNaive { period: usize, tail: Vec<f64> },
    Ses { level: f64 },
    Ar { phi: Vec<f64>, mean: f64, history: Vec<f64> },
}

/// A forecaster fitted to one series.
pub struct Fitted {
    model: FittedModel,
}

impl Fitted {
    /// Point forecasts for the next `horizon` steps.
    pub fn forecast(&self, horizon: usize) -> Vec<f64> {
        match &self.model {
            FittedModel::NaiveLast { last } => vec![*last; horizon],
            FittedModel::SeasonalNaive { period, tail } => {
                (0..horizon).map(|h| tail[h % period]).collect()
            }
            FittedModel::Ses { level } => vec![*level; horizon],
            FittedModel::Ar { phi, mean, history } => {
                let p = phi.len();
                let mut hist = history.clone();
                let mut out = Vec::with_capacity(horizon);
                for _ in 0..horizon {
                    let next: f64 = (0..p).map(|j| phi[j] * hist[hist.len() - 1 - j]).sum();
                    hist.push(next);
                    out.push(next + mean);
                }
                out
            }
        }
    }
}

/// Autoregressive coefficients of order `p` via the Yule-Walker equations,
/// solved with Levinson-Durbin on the demeaned series. Returns the
/// coefficients (lag 1 first) and the series mean. A constant series yields
/// all-zero coefficients.
pub fn yule_walker(train: &[f64], p: usize) -> Result<(Vec<f64>, f64)> {
    if p < 1 {
        return Err(Error::Param("AR order must be at least 1".into()));
    }
    if train.len() < 2 * p + 2 {
        return Err(Error::Shape(format!(
            "fitting AR({p}) needs at least {} points, got {}",
            2 * p + 2,
            train.len()
        )));
    }
    let n = train.len();
    let mean = train.iter().sum::<f64>() / n as f64;
    let x: Vec<f64> = train.iter().map(|v| v - mean).collect();
    let gamma: Vec<f64> = (0..=p)
        .map(|k| (0..n - k).map(|t| x[t] * x[t + k]).sum::<f64>() / n as f64)
        .collect();
    if gamma[0] == 0.0 {
        return Ok((vec![0.0; p], mean));
    }
    let mut a = vec![0.0; p + 1];
    let mut e = gamma[0];
    for k in 1..=p {
        let acc: f64 = gamma[k] - (1..k).map(|j| a[j] * gamma[k - j]).sum::<f64>();
        let lambda = acc / e;
        let mut next = a.clone();
        next[k] = lambda;
        for j in 1..k {
            next[j] = a[j] - lambda * a[k - j];
        }
        a = next;
        e *= 1.0 - lambda * lambda;
        if e <= f64::EPSILON * gamma[0] {
            e = f64::EPSILON * gamma[0];
        }
    }
    Ok((a[1..].to_vec(), mean))
}

/// Fits a forecaster to one complete training series.
pub fn fit(train: &[f64], forecaster: &Forecaster) -> Result<Fitted> {
    if train.len() < MIN_TRAIN {
        return Err(Error::Shape(format!(
            "training needs at least {MIN_TRAIN} points, got {}",
            train.len()
        )));
    }
    if train.iter().any(|v| v.is_nan()) {
        return Err(Error::State("training series contains missing values".into()));
    }
    let model = match forecaster {
        Forecaster::NaiveLast => FittedModel::NaiveLast { last: *train.last().unwrap() },
        Forecaster::SeasonalNaive { period } => {
            if *period < 1 {
                return Err(Error::Param("period must be at least 1".into()));
            }
            if train.len() < 2 * period {
                return Err(Error::Shape(format!(
                    "seasonal-naive with period {period} needs at least {} points, got {}",
                    2 * period,
                    train.len()
                )));
            }
            FittedModel::SeasonalNaive {
                period: *period,
                tail: train[train.len() - period..].to_vec(),
            }
        }
        Forecaster::Ses { alpha } => {
            if !(*alpha > 0.0 && *alpha <= 1.0) {
                return Err(Error::Param(format!(
                    "alpha must lie in (0, 1], got {alpha}"
                )));
            }
            let mut level = train[0];
            for &v in &train[1..] {
                level = alpha * v + (1.0 - alpha) * level;
            }
            FittedModel::Ses { level }
        }
        Forecaster::Ar { order } => {
            let (phi, mean) = yule_walker(train, *order)?;
            let history: Vec<f64> = train[train.len() - order..]
                .iter()
                .map(|v| v - mean)
                .collect();
            FittedModel::Ar { phi, mean, history }
        }
    };
    Ok(Fitted { model })
}

/// Symmetric mean absolute percentage error in [0, 2]; terms where both
/// values are zero count as zero.
pub fn smape(y: &[f64], yhat: &[f64]) -> Result<f64> {
    if y.is_empty() {
        return Err(Error::EmptyMask);
    }
    if y.len() != yhat.len() {
        return Err(Error::Shape(format!(
            "forecast length {} does not match actuals {}",
            yhat.len(),
            y.len()
        )));
    }
    let total: f64 = y
        .iter()
        .zip(yhat)
        .map(|(a, f)| {
            let denom = (a.abs() + f.abs()) / 2.0;
            if denom == 0.0 {
                0.0
            } else {
                (a - f).abs() / denom
            }
        })
        .sum();
    Ok(total / y.len() as f64)
}

/// One line of the downstream report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DownstreamRow {
    pub algorithm: String,
    pub forecaster: String,
    pub mae: f64,
    pub smape: f64,
}

/// Forecast accuracy after repairing the contaminated training window with
/// each algorithm, bracketed by the oracle and the no-repair baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DownstreamReport {
    pub forecaster: String,
    pub split: f64,
    pub train_len: usize,
    pub horizon: usize,
    pub rows: Vec<DownstreamRow>,
}

fn score_forecasts(
    truth: &Dataset,
    train_len: usize,
    horizon: usize,
    fit_series: impl Fn(usize) -> Result<Fitted>,
) -> Result<(f64, f64)> {
    let m = truth.n_series();
    let mut mae_sum = 0.0;
    let mut smape_sum = 0.0;
    for i in 0..m {
        let fitted = fit_series(i)?;
        let yhat = fitted.forecast(horizon);
        let y = &truth.series(i)[train_len..train_len + horizon];
        mae_sum += mae(y, &yhat)?;
        smape_sum += smape(y, &yhat)?;
    }
    Ok((mae_sum / m as f64, smape_sum / m as f64))
}

/// Contaminates only the training window of `truth`, repairs it with each
/// algorithm, fits `forecaster` per series, and scores the forecasts on the
/// untouched holdout.
///
/// `split` is the training fraction in (0.5, 0.95]; the horizon defaults to
/// min(20, 0.1 * N) and must fit in the holdout. The report contains
/// `algorithms.len() + 2` rows: `__oracle__` (fitted on the uncontaminated
/// window), `__baseline__` (fitted on the mean-imputed window), then one row
/// per algorithm in input order.
#[allow(clippy::too_many_arguments)]
pub fn evaluate_downstream(
    registry: &Registry,
    truth: &Dataset,
    algorithms: &[(String, ParamMap)],
    forecaster: &Forecaster,
    contamination: &ContaminationSpec,
    split: f64,
    horizon: Option<usize>,
    seed: u64,
) -> Result<DownstreamReport> {
    if !(split > 0.5 && split <= 0.95) {
        return Err(Error::Spec(format!(
            "split must lie in (0.5, 0.95], got {split}"
        )));
    }
    if truth.missing_count() > 0 {
        return Err(Error::State(
            "downstream evaluation needs fully observed ground truth".into(),
        ));
    }
    let n = truth.n_points();
    let train_len = (split * n as f64).floor() as usize;
    let horizon = horizon.unwrap_or_else(|| default_horizon(n));
    if horizon < 1 {
        return Err(Error::Shape("horizon must be at least 1".into()));
    }
    if train_len + horizon > n {
        return Err(Error::Shape(format!(
            "horizon {horizon} exceeds the {} holdout points after the split",
            n - train_len
        )));
    }

    let truth_train = truth.truncate_time(train_len)?;
    let spec = contamination.clone().with_seed(seed);
    let (holed_train, _) = contaminate(&truth_train, &spec)?;

    let mut rows = Vec::with_capacity(algorithms.len() + 2);

    let (mae_v, smape_v) = score_forecasts(truth, train_len, horizon, |i| {
        fit(truth_train.series(i), forecaster)
    })?;
    rows.push(DownstreamRow {
        algorithm: ORACLE_NAME.into(),
        forecaster: forecaster.label().into(),
        mae: mae_v,
        smape: smape_v,
    });

    let baseline = registry.run(&holed_train, "mean", &ParamMap::new(), seed)?;
    let (mae_v, smape_v) = score_forecasts(truth, train_len, horizon, |i| {
        fit(baseline.imputed.series(i), forecaster)
    })?;
    rows.push(DownstreamRow {
        algorithm: BASELINE_NAME.into(),
        forecaster: forecaster.label().into(),
        mae: mae_v,
        smape: smape_v,
    });

    for (name, params) in algorithms {
        let run = registry.run(&holed_train, name, params, seed)?;
        let (mae_v, smape_v) = score_forecasts(truth, train_len, horizon, |i| {
            fit(run.imputed.series(i), forecaster)
        })?;
        rows.push(DownstreamRow {
            algorithm: name.clone(),
            forecaster: forecaster.label().into(),
            mae: mae_v,
            smape: smape_v,
        });
    }

    Ok(DownstreamReport {
        forecaster: forecaster.label().into(),
        split,
        train_len,
        horizon,
        rows,
    })
}
