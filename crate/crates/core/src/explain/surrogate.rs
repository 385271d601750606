//! Bagged regression trees predicting imputation error from series features.

use rand::Rng;

use crate::error::{Error, Result};
use crate::explain::features::N_FEATURES;
use crate::explain::shapley::Regressor;
use crate::seed::rng_from_seed;

pub const N_TREES: usize = 100;
pub const MAX_DEPTH: usize = 4;
/// Fewer training rows than this cannot support a meaningful fit.
pub const MIN_TRAIN_ROWS: usize = 10;

/// Feature rows paired with the observed imputation error.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingTable {
    pub rows: Vec<[f64; N_FEATURES]>,
    pub targets: Vec<f64>,
}

enum Node {
    Leaf(f64),
    Split {
        feature: usize,
        threshold: f64,
        left: Box<Node>,
        right: Box<Node>,
    },
}

impl Node {
    fn predict(&self, x: &[f64]) -> f64 {
        match self {
            Node::Leaf(v) => *v,
            Node::Split { feature, threshold, left, right } => {
                if x[*feature] <= *threshold {
                    left.predict(x)
                } else {
                    right.predict(x)
                }
            }
        }
    }
}

fn mean_of(ys: &[f64]) -> f64 {
    ys.iter().sum::<f64>() / ys.len() as f64
}

/// Best (feature, threshold, sse) split of the given rows, if any reduces
/// the squared error. Ties keep the lowest feature index, then the lowest
/// threshold.
fn best_split(rows: &[[f64; N_FEATURES]], ys: &[f64], indices: &[usize]) -> Option<(usize, f64, f64)> {
    let n = indices.len();
    let total_sum: f64 = indices.iter().map(|&i| ys[i]).sum();
    let total_sq: f64 = indices.iter().map(|&i| ys[i] * ys[i]).sum();
    let base_sse = total_sq - total_sum * total_sum / n as f64;
    let mut best: Option<(usize, f64, f64)> = None;
    for feature in 0..N_FEATURES {
        let mut order: Vec<usize> = indices.to_vec();
        order.sort_by(|&a, &b| rows[a][feature].partial_cmp(&rows[b][feature]).unwrap());
        let mut left_sum = 0.0;
        let mut left_sq = 0.0;
        for cut in 1..n {
            let i = order[cut - 1];
            left_sum += ys[i];
            left_sq += ys[i] * ys[i];
            let xv = rows[order[cut - 1]][feature];
            let xn = rows[order[cut]][feature];
            if xv == xn {
                continue;
            }
            let right_sum = total_sum - left_sum;
            let right_sq = total_sq - left_sq;
            let sse = (left_sq - left_sum * left_sum / cut as f64)
                + (right_sq - right_sum * right_sum / (n - cut) as f64);
            if best.map_or(true, |(_, _, b)| sse < b) {
                best = Some((feature, 0.5 * (xv + xn), sse));
            }
        }
    }
    best.filter(|&(_, _, sse)| sse < base_sse - 1e-12)
}

fn grow(rows: &[[f64; N_FEATURES]], ys: &[f64], indices: &[usize], depth: usize) -> Node {
    let leaf_value = mean_of(&indices.iter().map(|&i| ys[i]).collect::<Vec<_>>());
    if depth >= MAX_DEPTH || indices.len() < 2 {
        return Node::Leaf(leaf_value);
    }
    match best_split(rows, ys, indices) {
        None => Node::Leaf(leaf_value),
        Some((feature, threshold, _)) => {
            let (left, right): (Vec<usize>, Vec<usize>) = indices
                .iter()
                .partition(|&&i| rows[i][feature] <= threshold);
            Node::Split {
                feature,
                threshold,
                left: Box::new(grow(rows, ys, &left, depth + 1)),
                right: Box::new(grow(rows, ys, &right, depth + 1)),
            }
        }
    }
}

/// Bootstrap ensemble of [`N_TREES`] depth-[`MAX_DEPTH`] regression trees.
pub struct Surrogate {
    trees: Vec<Node>,
    /// Coefficient of determination on the training rows. Reported for
    /// diagnostics, never enforced.
    pub train_r2: f64,
}

impl Surrogate {
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.predict(x)).sum::<f64>() / self.trees.len() as f64
    }
}

impl Regressor for Surrogate {
    fn predict_one(&self, x: &[f64]) -> f64 {
        self.predict(x)
    }
}

/// Trains the bagged ensemble on `table` with seeded bootstrap resampling.
pub fn train_surrogate(table: &TrainingTable, seed: u64) -> Result<Surrogate> {
    let n = table.rows.len();
    if n != table.targets.len() {
        return Err(Error::Shape(format!(
            "feature rows and targets differ: {n} vs {}",
            table.targets.len()
        )));
    }
    if n < MIN_TRAIN_ROWS {
        return Err(Error::Data(format!(
            "training a surrogate needs at least {MIN_TRAIN_ROWS} rows, got {n}"
        )));
    }
    if table.targets.iter().any(|t| !t.is_finite()) {
        return Err(Error::Data("non-finite training target".into()));
    }
    let mut rng = rng_from_seed(seed);
    let mut trees = Vec::with_capacity(N_TREES);
    for _ in 0..N_TREES {
        let sample: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
        trees.push(grow(&table.rows, &table.targets, &sample, 0));
    }
    let surrogate = Surrogate { trees, train_r2: 0.0 };
    let preds: Vec<f64> = table.rows.iter().map(|r| surrogate.predict(r)).collect();
    let y_mean = mean_of(&table.targets);
    let sst: f64 = table.targets.iter().map(|y| (y - y_mean) * (y - y_mean)).sum();
    let sse: f64 = table
        .targets
        .iter()
        .zip(&preds)
        .map(|(y, p)| (y - p) * (y - p))
        .sum();
    let train_r2 = if sst == 0.0 { 1.0 } else { 1.0 - sse / sst };
    Ok(Surrogate { train_r2, ..surrogate })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table_from_fn(n: usize, f: impl Fn(usize) -> ([f64; N_FEATURES], f64)) -> TrainingTable {
        let mut rows = Vec::new();
        let mut targets = Vec::new();
        for i in 0..n {
            let (r, t) = f(i);
            rows.push(r);
            targets.push(t);
        }
        TrainingTable { rows, targets }
    }

    #[test]
    fn learns_a_step_function() {
        let table = table_from_fn(60, |i| {
            let mut row = [0.0; N_FEATURES];
            row[3] = i as f64 / 60.0;
            (row, if row[3] < 0.5 { 1.0 } else { 5.0 })
        });
        let model = train_surrogate(&table, 1).unwrap();
        assert!(model.train_r2 > 0.9, "r2 = {}", model.train_r2);
        let mut low = [0.0; N_FEATURES];
        low[3] = 0.1;
        let mut high = [0.0; N_FEATURES];
        high[3] = 0.9;
        assert!(model.predict(&low) < 2.0);
        assert!(model.predict(&high) > 4.0);
    }

    #[test]
    fn deterministic_given_seed() {
        let table = table_from_fn(30, |i| {
            let mut row = [0.0; N_FEATURES];
            row[0] = (i as f64).sin();
            row[7] = i as f64;
            (row, row[0] * 2.0 + row[7] * 0.1)
        });
        let a = train_surrogate(&table, 9).unwrap();
        let b = train_surrogate(&table, 9).unwrap();
        let mut probe = [0.0; N_FEATURES];
        probe[0] = 0.3;
        probe[7] = 14.0;
        assert_eq!(a.predict(&probe).to_bits(), b.predict(&probe).to_bits());
    }

    #[test]
    fn prediction_stays_within_target_range() {
        let table = table_from_fn(40, |i| {
            let mut row = [0.0; N_FEATURES];
            row[5] = (i % 7) as f64;
            (row, (i % 5) as f64)
        });
        let model = train_surrogate(&table, 3).unwrap();
        for i in 0..20 {
            let mut probe = [0.0; N_FEATURES];
            probe[5] = i as f64 - 5.0;
            let p = model.predict(&probe);
            assert!((0.0..=4.0).contains(&p), "{p}");
        }
    }

    #[test]
    fn constant_target_is_reproduced() {
        let table = table_from_fn(15, |i| {
            let mut row = [0.0; N_FEATURES];
            row[2] = i as f64;
            (row, 7.5)
        });
        let model = train_surrogate(&table, 0).unwrap();
        assert_eq!(model.train_r2, 1.0);
        let mut probe = [0.0; N_FEATURES];
        probe[2] = 3.0;
        assert!((model.predict(&probe) - 7.5).abs() < 1e-12);
    }

    #[test]
    fn too_few_rows_rejected() {
        let table = table_from_fn(9, |i| ([i as f64; N_FEATURES], i as f64));
        assert!(matches!(train_surrogate(&table, 0), Err(Error::Data(_))));
    }
}
