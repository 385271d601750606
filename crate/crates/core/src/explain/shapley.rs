//! Shapley attribution of a regressor's prediction to its input features.
//!
//! Absent features are marginalised over a background sample: the value of a
//! coalition S is the mean prediction over background rows with the features
//! in S taken from the explained input.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::rng_from_seed;

/// Anything that maps a feature vector to a scalar prediction.
pub trait Regressor {
    fn predict_one(&self, x: &[f64]) -> f64;
}

/// Exact enumeration is refused beyond this many features.
pub const EXACT_MAX_FEATURES: usize = 20;

/// Per-feature attributions. `values[i]` is the contribution of feature `i`
/// to moving the prediction from `base` (mean prediction over the
/// background) to `prediction`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapleyValues {
    pub values: Vec<f64>,
    pub base: f64,
    pub prediction: f64,
    /// Standard errors of the permutation estimate; absent for exact values.
    pub std_errors: Option<Vec<f64>>,
}

fn check_inputs(x: &[f64], background: &[Vec<f64>]) -> Result<()> {
    if x.is_empty() {
        return Err(Error::Shape("cannot attribute over zero features".into()));
    }
    if background.is_empty() {
        return Err(Error::Data("empty background sample".into()));
    }
    if let Some(bad) = background.iter().find(|b| b.len() != x.len()) {
        return Err(Error::Shape(format!(
            "background row has {} features, input has {}",
            bad.len(),
            x.len()
        )));
    }
    Ok(())
}

/// Mean prediction over the background with coalition members (set bits of
/// `mask`) taken from `x`.
fn coalition_value(
    model: &dyn Regressor,
    x: &[f64],
    background: &[Vec<f64>],
    mask: u32,
    buffer: &mut Vec<f64>,
) -> f64 {
    let mut sum = 0.0;
    for b in background {
        buffer.clear();
        buffer.extend(
            (0..x.len()).map(|i| if mask >> i & 1 == 1 { x[i] } else { b[i] }),
        );
        sum += model.predict_one(buffer);
    }
    sum / background.len() as f64
}

/// Exact Shapley values by enumerating all 2^d coalitions.
///
/// Guaranteed efficient: the values sum to `prediction - base` up to float
/// round-off. Refused with `Complexity` beyond [`EXACT_MAX_FEATURES`]
/// features.
pub fn shapley_exact(
    model: &dyn Regressor,
    x: &[f64],
    background: &[Vec<f64>],
) -> Result<ShapleyValues> {
    check_inputs(x, background)?;
    let d = x.len();
    if d > EXACT_MAX_FEATURES {
        return Err(Error::Complexity(format!(
            "exact attribution enumerates 2^{d} coalitions; the cap is 2^{EXACT_MAX_FEATURES}"
        )));
    }
    let n_masks = 1usize << d;
    let mut v = vec![0.0; n_masks];
    let mut buffer = Vec::with_capacity(d);
    for (mask, value) in v.iter_mut().enumerate() {
        *value = coalition_value(model, x, background, mask as u32, &mut buffer);
    }
    // weight of a coalition of size s when adding one more feature
    let mut factorial = vec![1.0; d + 1];
    for k in 1..=d {
        factorial[k] = factorial[k - 1] * k as f64;
    }
    let weight: Vec<f64> = (0..d)
        .map(|s| factorial[s] * factorial[d - 1 - s] / factorial[d])
        .collect();
    let mut values = vec![0.0; d];
    for mask in 0..n_masks {
        let size = (mask as u32).count_ones() as usize;
        for i in 0..d {
            if mask >> i & 1 == 0 {
                values[i] += weight[size] * (v[mask | 1 << i] - v[mask]);
            }
        }
    }
    Ok(ShapleyValues {
        values,
        base: v[0],
        prediction: v[n_masks - 1],
        std_errors: None,
    })
}

/// Monte Carlo Shapley values from random feature permutations, with a
/// standard error per feature. Needs at least two permutations.
pub fn shapley_sampled(
    model: &dyn Regressor,
    x: &[f64],
    background: &[Vec<f64>],
    n_permutations: usize,
    seed: u64,
) -> Result<ShapleyValues> {
    check_inputs(x, background)?;
    if n_permutations < 2 {
        return Err(Error::Param(
            "sampled attribution needs at least 2 permutations".into(),
        ));
    }
    let d = x.len();
    if d > 32 {
        return Err(Error::Complexity(
            "sampled attribution supports at most 32 features".into(),
        ));
    }
    let mut rng = rng_from_seed(seed);
    let mut buffer = Vec::with_capacity(d);
    let full_mask = if d == 32 { u32::MAX } else { (1u32 << d) - 1 };
    let base = coalition_value(model, x, background, 0, &mut buffer);
    let full = coalition_value(model, x, background, full_mask, &mut buffer);
    let mut contributions: Vec<Vec<f64>> = vec![Vec::with_capacity(n_permutations); d];
    let mut order: Vec<usize> = (0..d).collect();
    for _ in 0..n_permutations {
        order.shuffle(&mut rng);
        let mut mask = 0u32;
        let mut prev = base;
        for &i in &order {
            mask |= 1 << i;
            let next = coalition_value(model, x, background, mask, &mut buffer);
            contributions[i].push(next - prev);
            prev = next;
        }
    }
    let n = n_permutations as f64;
    let mut values = Vec::with_capacity(d);
    let mut std_errors = Vec::with_capacity(d);
    for c in &contributions {
        let mean = c.iter().sum::<f64>() / n;
        let var = c.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
        values.push(mean);
        std_errors.push((var / n).sqrt());
    }
    Ok(ShapleyValues {
        values,
        base,
        prediction: full,
        std_errors: Some(std_errors),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    pub struct Linear {
        pub w: Vec<f64>,
        pub b: f64,
    }

    impl Regressor for Linear {
        fn predict_one(&self, x: &[f64]) -> f64 {
            self.w.iter().zip(x).map(|(w, x)| w * x).sum::<f64>() + self.b
        }
    }

    fn setup(d: usize, seed: u64) -> (Linear, Vec<f64>, Vec<Vec<f64>>) {
        let mut rng = rng_from_seed(seed);
        let w: Vec<f64> = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
        let x: Vec<f64> = (0..d).map(|_| rng.random_range(-3.0..3.0)).collect();
        let background: Vec<Vec<f64>> = (0..20)
            .map(|_| (0..d).map(|_| rng.random_range(-3.0..3.0)).collect())
            .collect();
        (Linear { w, b: 0.7 }, x, background)
    }

    /// For a linear model, phi_i = w_i * (x_i - mean background_i).
    fn linear_oracle(model: &Linear, x: &[f64], background: &[Vec<f64>]) -> Vec<f64> {
        let d = x.len();
        (0..d)
            .map(|i| {
                let bg_mean =
                    background.iter().map(|b| b[i]).sum::<f64>() / background.len() as f64;
                model.w[i] * (x[i] - bg_mean)
            })
            .collect()
    }

    #[test]
    fn exact_matches_linear_closed_form() {
        let (model, x, bg) = setup(8, 1);
        let sv = shapley_exact(&model, &x, &bg).unwrap();
        let oracle = linear_oracle(&model, &x, &bg);
        for (got, want) in sv.values.iter().zip(&oracle) {
            assert!((got - want).abs() < 1e-10, "{got} vs {want}");
        }
    }

    #[test]
    fn efficiency_holds() {
        for seed in 0..5 {
            let (model, x, bg) = setup(10, seed);
            let sv = shapley_exact(&model, &x, &bg).unwrap();
            let total: f64 = sv.values.iter().sum();
            assert!(
                (total - (sv.prediction - sv.base)).abs() < 1e-9,
                "gap {}",
                total - (sv.prediction - sv.base)
            );
        }
    }

    #[test]
    fn dummy_feature_gets_exactly_zero() {
        let (mut model, x, bg) = setup(7, 3);
        model.w[4] = 0.0;
        let sv = shapley_exact(&model, &x, &bg).unwrap();
        assert_eq!(sv.values[4], 0.0);
    }

    #[test]
    fn symmetric_features_get_equal_values() {
        let model = Linear { w: vec![1.5, 1.5, -0.3], b: 0.0 };
        let x = vec![2.0, 2.0, 1.0];
        // identical background columns for features 0 and 1
        let bg = vec![vec![0.5, 0.5, 0.2], vec![-1.0, -1.0, 0.8], vec![0.0, 0.0, -0.4]];
        let sv = shapley_exact(&model, &x, &bg).unwrap();
        assert!((sv.values[0] - sv.values[1]).abs() < 1e-12);
    }

    #[test]
    fn efficiency_holds_for_nonlinear_model() {
        struct Product;
        impl Regressor for Product {
            fn predict_one(&self, x: &[f64]) -> f64 {
                x[0] * x[1] + x[2].sin()
            }
        }
        let x = vec![1.2, -0.7, 2.0];
        let bg = vec![vec![0.0, 1.0, 0.5], vec![1.0, 0.3, -1.0]];
        let sv = shapley_exact(&Product, &x, &bg).unwrap();
        let total: f64 = sv.values.iter().sum();
        assert!((total - (sv.prediction - sv.base)).abs() < 1e-12);
    }

    #[test]
    fn sampled_agrees_within_three_standard_errors() {
        let (model, x, bg) = setup(9, 11);
        let exact = shapley_exact(&model, &x, &bg).unwrap();
        let sampled = shapley_sampled(&model, &x, &bg, 400, 5).unwrap();
        let se = sampled.std_errors.as_ref().unwrap();
        for i in 0..x.len() {
            let gap = (sampled.values[i] - exact.values[i]).abs();
            let bound = 3.0 * se[i] + 1e-9;
            assert!(gap <= bound, "feature {i}: gap {gap} > {bound}");
        }
    }

    #[test]
    fn sampled_is_deterministic() {
        let (model, x, bg) = setup(6, 13);
        let a = shapley_sampled(&model, &x, &bg, 50, 2).unwrap();
        let b = shapley_sampled(&model, &x, &bg, 50, 2).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn dimension_cap_enforced() {
        let d = EXACT_MAX_FEATURES + 1;
        let model = Linear { w: vec![1.0; d], b: 0.0 };
        let x = vec![0.5; d];
        let bg = vec![vec![0.0; d]];
        assert!(matches!(
            shapley_exact(&model, &x, &bg),
            Err(Error::Complexity(_))
        ));
    }

    #[test]
    fn background_shape_checked() {
        let model = Linear { w: vec![1.0, 2.0], b: 0.0 };
        assert!(matches!(
            shapley_exact(&model, &[1.0, 2.0], &[]),
            Err(Error::Data(_))
        ));
        assert!(matches!(
            shapley_exact(&model, &[1.0, 2.0], &[vec![1.0]]),
            Err(Error::Shape(_))
        ));
    }
}
