//! Hyperparameter search against a fixed validation mask.
//!
//! [`tune`] contaminates the reference data once, then evaluates candidate
//! parameter sets by imputing that single contaminated copy and scoring at
//! the hidden cells. Lower is better for both supported metrics.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, DeltaSource, MaskDelta};
use crate::error::{Error, Result};
use crate::gengap::{contaminate, round_count, ContaminationSpec};
use crate::impute::{ParamMap, ParamValue, Registry};
use crate::metrics::{mae, masked_pairs, rmse};
use crate::seed::rng_from_seed;

/// Objective to minimise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TuneMetric {
    Rmse,
    Mae,
}

impl TuneMetric {
    pub fn label(&self) -> &'static str {
        match self {
            TuneMetric::Rmse => "rmse",
            TuneMetric::Mae => "mae",
        }
    }

    fn eval(&self, truth: &Dataset, imputed: &Dataset, target: &MaskDelta) -> Result<f64> {
        let (xs, ys) = masked_pairs(truth, imputed, target)?;
        match self {
            TuneMetric::Rmse => rmse(&xs, &ys),
            TuneMetric::Mae => mae(&xs, &ys),
        }
    }
}

/// Domain of one hyperparameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum ParamDomain {
    /// Inclusive integer range; `step` defaults to 1.
    IntRange {
        min: i64,
        max: i64,
        #[serde(default)]
        step: Option<i64>,
    },
    /// Inclusive real range. Grid search needs `step`; random search draws
    /// uniformly when it is absent.
    FloatRange {
        min: f64,
        max: f64,
        #[serde(default)]
        step: Option<f64>,
    },
    /// Explicit finite set.
    Choice { values: Vec<ParamValue> },
}

impl ParamDomain {
    fn validate(&self, name: &str) -> Result<()> {
        match self {
            ParamDomain::IntRange { min, max, step } => {
                if min > max {
                    return Err(Error::Spec(format!("domain `{name}`: min > max")));
                }
                if step.is_some_and(|s| s < 1) {
                    return Err(Error::Spec(format!("domain `{name}`: step must be >= 1")));
                }
            }
            ParamDomain::FloatRange { min, max, step } => {
                if !(min.is_finite() && max.is_finite()) || min > max {
                    return Err(Error::Spec(format!("domain `{name}`: bad real range")));
                }
                if step.is_some_and(|s| !(s > 0.0)) {
                    return Err(Error::Spec(format!("domain `{name}`: step must be > 0")));
                }
            }
            ParamDomain::Choice { values } => {
                if values.is_empty() {
                    return Err(Error::Spec(format!("domain `{name}`: empty choice set")));
                }
            }
        }
        Ok(())
    }

    /// Every lattice point, in ascending order. Real ranges without a step
    /// cannot be enumerated.
    fn enumerate(&self, name: &str) -> Result<Vec<ParamValue>> {
        match self {
            ParamDomain::IntRange { min, max, step } => {
                let step = step.unwrap_or(1);
                Ok((*min..=*max)
                    .step_by(step as usize)
                    .map(ParamValue::Int)
                    .collect())
            }
            ParamDomain::FloatRange { min, max, step } => {
                let step = step.ok_or_else(|| {
                    Error::Spec(format!(
                        "domain `{name}`: grid search over a real range requires a step"
                    ))
                })?;
                let mut points = Vec::new();
                let mut k = 0u64;
                loop {
                    let v = min + k as f64 * step;
                    if v > max + step * 1e-9 {
                        break;
                    }
                    points.push(ParamValue::Float(v.min(*max)));
                    k += 1;
                }
                Ok(points)
            }
            ParamDomain::Choice { values } => Ok(values.clone()),
        }
    }

    fn sample(&self, rng: &mut crate::seed::SeededRng) -> ParamValue {
        match self {
            ParamDomain::IntRange { min, max, step } => {
                let step = step.unwrap_or(1);
                let count = (max - min) / step + 1;
                ParamValue::Int(min + step * rng.random_range(0..count))
            }
            ParamDomain::FloatRange { min, max, step } => match step {
                Some(s) => {
                    let count = ((max - min) / s).floor() as i64 + 1;
                    ParamValue::Float((min + *s * rng.random_range(0..count) as f64).min(*max))
                }
                None => ParamValue::Float(rng.random_range(*min..=*max)),
            },
            ParamDomain::Choice { values } => values[rng.random_range(0..values.len())],
        }
    }
}

/// Named parameter domains; keys iterate in name order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(transparent)]
pub struct SearchSpace {
    pub domains: BTreeMap<String, ParamDomain>,
}

impl SearchSpace {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, name: impl Into<String>, domain: ParamDomain) -> Self {
        self.domains.insert(name.into(), domain);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.domains.is_empty() {
            return Err(Error::Spec("empty search space".into()));
        }
        for (name, d) in &self.domains {
            d.validate(name)?;
        }
        Ok(())
    }

    /// Full lattice in lexicographic order of the sorted parameter names,
    /// the last name varying fastest.
    pub fn enumerate(&self) -> Result<Vec<ParamMap>> {
        self.validate()?;
        let axes: Vec<(&String, Vec<ParamValue>)> = self
            .domains
            .iter()
            .map(|(name, d)| d.enumerate(name).map(|vals| (name, vals)))
            .collect::<Result<_>>()?;
        let mut grid: Vec<ParamMap> = vec![ParamMap::new()];
        for (name, vals) in axes {
            let mut next = Vec::with_capacity(grid.len() * vals.len());
            for base in &grid {
                for v in &vals {
                    let mut p = base.clone();
                    p.insert(name.clone(), *v);
                    next.push(p);
                }
            }
            grid = next;
        }
        Ok(grid)
    }

    fn sample(&self, rng: &mut crate::seed::SeededRng) -> ParamMap {
        self.domains
            .iter()
            .map(|(name, d)| (name.clone(), d.sample(rng)))
            .collect()
    }
}

/// Search strategy.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum Strategy {
    /// Exhaustive lattice walk.
    Grid,
    /// `n_trials` independent draws from the space.
    Random { n_trials: usize },
    /// `budget` random candidates raced on growing series subsets: the
    /// fraction starts at 25% and doubles each rung, the worse half
    /// (rounded down) is dropped between rungs.
    SuccessiveHalving { budget: usize },
}

impl Strategy {
    pub fn label(&self) -> &'static str {
        match self {
            Strategy::Grid => "grid",
            Strategy::Random { .. } => "random",
            Strategy::SuccessiveHalving { .. } => "successive-halving",
        }
    }
}

/// One evaluated candidate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    /// Execution order, 0-based.
    pub index: usize,
    pub params: ParamMap,
    pub score: f64,
    /// Fraction of series the candidate was evaluated on.
    pub data_fraction: f64,
}

/// Outcome of a [`tune`] call. `best_score` is the minimum over `trials`,
/// ties resolved toward the earlier trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningResult {
    pub algorithm: String,
    pub strategy: Strategy,
    pub metric: TuneMetric,
    pub best_params: ParamMap,
    pub best_score: f64,
    pub trials: Vec<Trial>,
    /// The fixed validation cells every candidate was scored on.
    pub validation_mask: MaskDelta,
}

/// Runs a hyperparameter search for `algorithm` on `truth`.
///
/// The validation mask comes from contaminating `truth` once with
/// `contamination`; every candidate imputes the same contaminated copy.
pub fn tune(
    registry: &Registry,
    truth: &Dataset,
    algorithm: &str,
    space: &SearchSpace,
    strategy: &Strategy,
    contamination: &ContaminationSpec,
    metric: TuneMetric,
    seed: u64,
) -> Result<TuningResult> {
    space.validate()?;
    if !registry.contains(algorithm) {
        return Err(Error::UnknownAlgorithm(algorithm.to_string()));
    }
    let (holed, mask) = contaminate(truth, contamination)?;
    let mut rng = rng_from_seed(seed);

    let mut trials: Vec<Trial> = Vec::new();
    let evaluate_full = |params: &ParamMap, trials: &mut Vec<Trial>| -> Result<()> {
        let run = registry.run(&holed, algorithm, params, seed)?;
        let score = metric.eval(truth, &run.imputed, &mask)?;
        trials.push(Trial {
            index: trials.len(),
            params: params.clone(),
            score,
            data_fraction: 1.0,
        });
        Ok(())
    };

    match strategy {
        Strategy::Grid => {
            for params in space.enumerate()? {
                evaluate_full(&params, &mut trials)?;
            }
        }
        Strategy::Random { n_trials } => {
            if *n_trials == 0 {
                return Err(Error::Spec("random search needs n_trials >= 1".into()));
            }
            for _ in 0..*n_trials {
                let params = space.sample(&mut rng);
                evaluate_full(&params, &mut trials)?;
            }
        }
        Strategy::SuccessiveHalving { budget } => {
            if *budget == 0 {
                return Err(Error::Spec("successive halving needs budget >= 1".into()));
            }
            run_halving(
                registry, truth, &holed, &mask, algorithm, space, *budget, metric, seed,
                &mut rng, &mut trials,
            )?;
        }
    }

    let best = trials
        .iter()
        .min_by(|a, b| {
            a.score
                .partial_cmp(&b.score)
                .expect("scores are finite")
                .then(a.index.cmp(&b.index))
        })
        .ok_or_else(|| Error::Spec("no trial was run".into()))?;
    Ok(TuningResult {
        algorithm: algorithm.to_string(),
        strategy: strategy.clone(),
        metric,
        best_params: best.params.clone(),
        best_score: best.score,
        trials: trials.clone(),
        validation_mask: mask,
    })
}

/// Restricts a delta to a sorted series subset, reindexing series to the
/// subset's positions.
fn restrict_mask(mask: &MaskDelta, subset: &[usize]) -> MaskDelta {
    let lookup: BTreeMap<usize, usize> =
        subset.iter().enumerate().map(|(new, &old)| (old, new)).collect();
    let positions = mask
        .positions
        .iter()
        .filter_map(|&(i, j)| lookup.get(&i).map(|&new| (new, j)))
        .collect();
    MaskDelta::new(positions, DeltaSource::Contaminated)
}

#[allow(clippy::too_many_arguments)]
fn run_halving(
    registry: &Registry,
    truth: &Dataset,
    holed: &Dataset,
    mask: &MaskDelta,
    algorithm: &str,
    space: &SearchSpace,
    budget: usize,
    metric: TuneMetric,
    seed: u64,
    rng: &mut crate::seed::SeededRng,
    trials: &mut Vec<Trial>,
) -> Result<()> {
    let m = truth.n_series();
    let candidates: Vec<ParamMap> = (0..budget).map(|_| space.sample(rng)).collect();
    // nested subsets: every rung extends the previous one
    let mut permutation: Vec<usize> = (0..m).collect();
    permutation.shuffle(rng);

    let n_rungs = ((budget as f64).log2().ceil() as usize).max(1);
    let mut alive: Vec<usize> = (0..budget).collect();
    for rung in 0..n_rungs {
        let fraction = if rung + 1 == n_rungs {
            1.0
        } else {
            (0.25 * 2f64.powi(rung as i32)).min(1.0)
        };
        let size = round_count(fraction * m as f64).clamp(1, m);
        let mut subset = permutation[..size].to_vec();
        subset.sort_unstable();
        let (truth_sub, holed_sub, mask_sub) = if size == m {
            (truth.clone(), holed.clone(), mask.clone())
        } else {
            (
                truth.select_series(&subset)?,
                holed.select_series(&subset)?,
                restrict_mask(mask, &subset),
            )
        };
        let mut scored: Vec<(f64, usize, usize)> = Vec::new(); // (score, trial index, candidate)
        for &c in &alive {
            let run = registry.run(&holed_sub, algorithm, &candidates[c], seed)?;
            let score = metric.eval(&truth_sub, &run.imputed, &mask_sub)?;
            let index = trials.len();
            trials.push(Trial {
                index,
                params: candidates[c].clone(),
                score,
                data_fraction: fraction,
            });
            scored.push((score, index, c));
        }
        if rung + 1 < n_rungs {
            scored.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite").then(a.1.cmp(&b.1)));
            scored.truncate(scored.len().div_ceil(2));
            alive = scored.into_iter().map(|(_, _, c)| c).collect();
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::impute::{Family, ImputeOutput};
    use crate::synthetic::{generate_synthetic, SyntheticKind};

    /// Registry with a stub that fills every missing cell with the value of
    /// its `fill` parameter, so scores are a known function of the params.
    fn stub_registry() -> Registry {
        let mut reg = Registry::with_builtins();
        reg.register(Family::Stats, "const-fill", |ds, p, _| {
            let fill = p
                .get("fill")
                .map(|v| v.as_f64())
                .ok_or_else(|| Error::Param("missing `fill`".into()))?;
            let extra = p.get("extra").map(|v| v.as_f64()).unwrap_or(0.0);
            let mut values = ds.rows().to_vec();
            for row in &mut values {
                for v in row.iter_mut() {
                    if v.is_nan() {
                        *v = fill.abs() + extra;
                    }
                }
            }
            Ok(ImputeOutput {
                imputed: ds.with_values(values)?,
                iterations: None,
                resolved_params: p.clone(),
            })
        })
        .unwrap();
        reg
    }

    fn zeros_truth() -> Dataset {
        // all-zero truth so the score of const-fill is exactly |fill| + extra
        Dataset::new(vec![vec![0.0; 60]; 4]).unwrap()
    }

    fn spec() -> ContaminationSpec {
        ContaminationSpec::mono(0.2, 9)
    }

    #[test]
    fn grid_is_lexicographic_and_exhaustive() {
        let space = SearchSpace::new()
            .with("a", ParamDomain::IntRange { min: 0, max: 2, step: None })
            .with(
                "b",
                ParamDomain::Choice {
                    values: vec![ParamValue::Float(0.5), ParamValue::Float(1.5)],
                },
            );
        let grid = space.enumerate().unwrap();
        assert_eq!(grid.len(), 6);
        let flat: Vec<(i64, f64)> = grid
            .iter()
            .map(|p| {
                let a = match p["a"] {
                    ParamValue::Int(v) => v,
                    _ => panic!(),
                };
                (a, p["b"].as_f64())
            })
            .collect();
        assert_eq!(
            flat,
            vec![(0, 0.5), (0, 1.5), (1, 0.5), (1, 1.5), (2, 0.5), (2, 1.5)]
        );
    }

    #[test]
    fn float_range_without_step_rejected_for_grid() {
        let space = SearchSpace::new().with(
            "x",
            ParamDomain::FloatRange { min: 0.0, max: 1.0, step: None },
        );
        assert!(matches!(space.enumerate(), Err(Error::Spec(_))));
    }

    #[test]
    fn float_range_step_endpoints() {
        let space = SearchSpace::new().with(
            "x",
            ParamDomain::FloatRange { min: 0.1, max: 0.5, step: Some(0.1) },
        );
        let grid = space.enumerate().unwrap();
        let xs: Vec<f64> = grid.iter().map(|p| p["x"].as_f64()).collect();
        assert_eq!(xs.len(), 5);
        assert!((xs[0] - 0.1).abs() < 1e-12);
        assert!((xs[4] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn tune_grid_minimises_and_breaks_ties_early() {
        let reg = stub_registry();
        // |fill| is minimised by both -1 and 1; the earlier trial (-1) wins
        let space = SearchSpace::new().with(
            "fill",
            ParamDomain::Choice {
                values: vec![
                    ParamValue::Float(-1.0),
                    ParamValue::Float(1.0),
                    ParamValue::Float(2.0),
                ],
            },
        );
        let result = tune(
            &reg,
            &zeros_truth(),
            "const-fill",
            &space,
            &Strategy::Grid,
            &spec(),
            TuneMetric::Rmse,
            0,
        )
        .unwrap();
        assert_eq!(result.trials.len(), 3);
        assert_eq!(result.best_params["fill"], ParamValue::Float(-1.0));
        assert!((result.best_score - 1.0).abs() < 1e-12);
        assert_eq!(result.strategy.label(), "grid");
    }

    #[test]
    fn validation_mask_matches_contamination() {
        let reg = stub_registry();
        let space = SearchSpace::new().with(
            "fill",
            ParamDomain::Choice { values: vec![ParamValue::Float(0.0)] },
        );
        let truth = zeros_truth();
        let result = tune(
            &reg, &truth, "const-fill", &space, &Strategy::Grid, &spec(),
            TuneMetric::Mae, 5,
        )
        .unwrap();
        let (_, expected) = contaminate(&truth, &spec()).unwrap();
        assert_eq!(result.validation_mask, expected);
    }

    #[test]
    fn random_search_is_seeded_and_counted() {
        let reg = stub_registry();
        let space = SearchSpace::new().with(
            "fill",
            ParamDomain::FloatRange { min: 0.5, max: 4.0, step: None },
        );
        let strategy = Strategy::Random { n_trials: 12 };
        let sp = spec();
        let truth = zeros_truth();
        let a = tune(&reg, &truth, "const-fill", &space, &strategy, &sp, TuneMetric::Rmse, 3)
            .unwrap();
        let b = tune(&reg, &truth, "const-fill", &space, &strategy, &sp, TuneMetric::Rmse, 3)
            .unwrap();
        assert_eq!(a.trials.len(), 12);
        assert_eq!(a, b);
        for t in &a.trials {
            let v = t.params["fill"].as_f64();
            assert!((0.5..=4.0).contains(&v));
        }
        assert_eq!(a.best_score, a.trials.iter().map(|t| t.score).fold(f64::INFINITY, f64::min));
    }

    #[test]
    fn halving_schedules_fractions_and_survivors() {
        let reg = stub_registry();
        let space = SearchSpace::new().with(
            "fill",
            ParamDomain::FloatRange { min: 1.0, max: 9.0, step: None },
        );
        let truth = Dataset::new(vec![vec![0.0; 60]; 8]).unwrap();
        let result = tune(
            &reg,
            &truth,
            "const-fill",
            &space,
            &Strategy::SuccessiveHalving { budget: 8 },
            &spec(),
            TuneMetric::Rmse,
            17,
        )
        .unwrap();
        // budget 8 -> 3 rungs at fractions 0.25, 0.5, 1.0 with 8, 4, 2 trials
        let fractions: Vec<f64> = result.trials.iter().map(|t| t.data_fraction).collect();
        assert_eq!(fractions.len(), 14);
        assert_eq!(&fractions[..8], &[0.25; 8]);
        assert_eq!(&fractions[8..12], &[0.5; 4]);
        assert_eq!(&fractions[12..], &[1.0; 2]);
        // const-fill's score is series-independent, so survivors are the
        // candidates with the smallest fills
        let mut rung0: Vec<f64> = result.trials[..8].iter().map(|t| t.score).collect();
        rung0.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut survivors_sorted: Vec<f64> =
            result.trials[8..12].iter().map(|t| t.score).collect();
        survivors_sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        // scores repeat across rungs up to rounding: the rung evaluates a
        // different number of masked cells, which perturbs the RMSE mean by
        // an ulp or two
        for (lo, hi) in rung0[..4].iter().zip(&survivors_sorted) {
            assert!((lo - hi).abs() <= 1e-12 * lo.abs().max(1.0), "{lo} vs {hi}");
        }
        assert_eq!(result.best_score, result.trials.iter().map(|t| t.score).fold(f64::INFINITY, f64::min));
    }

    #[test]
    fn zero_budget_rejected() {
        let reg = stub_registry();
        let space = SearchSpace::new().with(
            "fill",
            ParamDomain::Choice { values: vec![ParamValue::Float(1.0)] },
        );
        for strategy in [
            Strategy::Random { n_trials: 0 },
            Strategy::SuccessiveHalving { budget: 0 },
        ] {
            assert!(matches!(
                tune(&reg, &zeros_truth(), "const-fill", &space, &strategy, &spec(), TuneMetric::Rmse, 0),
                Err(Error::Spec(_))
            ));
        }
    }

    #[test]
    fn unknown_algorithm_rejected() {
        let reg = stub_registry();
        let space = SearchSpace::new().with(
            "fill",
            ParamDomain::Choice { values: vec![ParamValue::Float(1.0)] },
        );
        assert!(matches!(
            tune(&reg, &zeros_truth(), "nope", &space, &Strategy::Grid, &spec(), TuneMetric::Rmse, 0),
            Err(Error::UnknownAlgorithm(_))
        ));
    }

    #[test]
    fn real_algorithm_tunes_knn() {
        let truth = generate_synthetic(SyntheticKind::CorrelatedLowrank, 8, 80, 0.05, 2).unwrap();
        let space = SearchSpace::new().with("k", ParamDomain::IntRange { min: 1, max: 7, step: None });
        let reg = Registry::with_builtins();
        let result = tune(
            &reg, &truth, "knn", &space, &Strategy::Grid,
            &ContaminationSpec::mono(0.1, 4), TuneMetric::Rmse, 0,
        )
        .unwrap();
        assert_eq!(result.trials.len(), 7);
        assert!(result.best_score.is_finite());
        assert!(result.best_params.contains_key("k"));
    }
}
