//! Property tests for the library's structural invariants.

use std::collections::BTreeMap;

use proptest::prelude::*;

use gapfill::dataset::{DeltaSource, MaskDelta};
use gapfill::downstream::smape;
use gapfill::gengap::{contaminate, ContaminationSpec};
use gapfill::impute::{linear_interp, params, ParamMap, ParamValue, Registry};
use gapfill::metrics::{mae, rmse, score};
use gapfill::optimize::{ParamDomain, SearchSpace};
use gapfill::seed::{combine_seed, rng_from_seed};
use gapfill::synthetic::{generate_synthetic, SyntheticKind};

fn delta_by_series(delta: &MaskDelta) -> BTreeMap<usize, Vec<usize>> {
    let mut out: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for &(i, t) in &delta.positions {
        out.entry(i).or_default().push(t);
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn contamination_hits_exact_counts(
        m in 2usize..8,
        n in 60usize..240,
        rate in 0.01f64..0.5,
        prefix in 0.0f64..0.3,
        sf in 0.3f64..1.0,
        seed in any::<u64>(),
    ) {
        let truth = generate_synthetic(SyntheticKind::SinusoidMix, m, n, 0.2, seed).unwrap();
        let spec = ContaminationSpec::mono(rate, seed)
            .with_series_fraction(sf)
            .with_protected_prefix(prefix);
        prop_assume!((rate * n as f64).round() as usize
            <= n - (prefix * n as f64).ceil() as usize);
        let (holed, delta) = contaminate(&truth, &spec).unwrap();

        let expected_cells = (rate * n as f64).round() as usize;
        let expected_series = (sf * m as f64).round().max(1.0) as usize;
        let prefix_cols = (prefix * n as f64).ceil() as usize;
        let per_series = delta_by_series(&delta);
        prop_assert_eq!(per_series.len(), expected_series);
        for (i, cols) in &per_series {
            prop_assert_eq!(cols.len(), expected_cells, "series {}", i);
            prop_assert!(cols.iter().all(|&t| t >= prefix_cols));
            // mono-block gaps are contiguous
            prop_assert!(cols.windows(2).all(|w| w[1] == w[0] + 1));
        }
        prop_assert_eq!(holed.missing_count(), expected_series * expected_cells);
    }

    #[test]
    fn contamination_is_deterministic(
        m in 2usize..6,
        n in 60usize..160,
        rate in 0.01f64..0.4,
        seed in any::<u64>(),
    ) {
        let truth = generate_synthetic(SyntheticKind::Ar1, m, n, 1.0, seed).unwrap();
        let spec = ContaminationSpec::mono(rate, seed);
        let (a, da) = contaminate(&truth, &spec).unwrap();
        let (b, db) = contaminate(&truth, &spec).unwrap();
        prop_assert_eq!(da.positions, db.positions);
        for i in 0..m {
            for t in 0..n {
                prop_assert_eq!(a.value(i, t).to_bits(), b.value(i, t).to_bits());
            }
        }
    }

    #[test]
    fn deltas_are_sorted_unique_and_in_bounds(
        m in 2usize..8,
        n in 60usize..200,
        rate in 0.01f64..0.4,
        seed in any::<u64>(),
        multi in any::<bool>(),
    ) {
        let truth = generate_synthetic(SyntheticKind::SinusoidMix, m, n, 0.2, seed).unwrap();
        let spec = if multi {
            prop_assume!((rate * n as f64).round() >= 3.0);
            ContaminationSpec::multi(rate, 3, seed)
        } else {
            ContaminationSpec::mono(rate, seed)
        };
        let (holed, delta) = contaminate(&truth, &spec).unwrap();
        prop_assert!(delta.positions.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(delta.positions.iter().all(|&(i, t)| i < m && t < n));
        for &(i, t) in &delta.positions {
            prop_assert!(holed.is_missing(i, t));
            prop_assert!(!truth.is_missing(i, t));
        }
        prop_assert_eq!(holed.missing_count(), delta.positions.len());
    }

    #[test]
    fn rmse_dominates_mae(
        pairs in prop::collection::vec((-1e3f64..1e3, -1e3f64..1e3), 1..60)
    ) {
        let (x, y): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let r = rmse(&x, &y).unwrap();
        let m = mae(&x, &y).unwrap();
        prop_assert!(r >= m - 1e-12 * m.max(1.0), "rmse {} < mae {}", r, m);
    }

    #[test]
    fn smape_stays_in_range(
        pairs in prop::collection::vec((-50f64..50.0, -50f64..50.0), 1..40),
        zeros in prop::collection::vec(any::<bool>(), 1..40),
    ) {
        let (mut y, mut f): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        for (i, z) in zeros.iter().enumerate() {
            if *z && i < y.len() {
                y[i] = 0.0;
                f[i] = 0.0;
            }
        }
        let v = smape(&y, &f).unwrap();
        prop_assert!((0.0..=2.0).contains(&v), "smape {}", v);
        let all_matched = smape(&y, &y).unwrap();
        prop_assert_eq!(all_matched, 0.0);
    }

    #[test]
    fn interior_gaps_interpolate_linearly(
        n in 20usize..120,
        start_frac in 0.1f64..0.5,
        len_frac in 0.05f64..0.4,
        seed in any::<u64>(),
    ) {
        let truth = generate_synthetic(SyntheticKind::SinusoidMix, 1, n, 0.3, seed).unwrap();
        let start = 1 + (start_frac * (n - 2) as f64) as usize;
        let len = 1 + (len_frac * (n - start - 1) as f64) as usize;
        prop_assume!(start + len < n);
        let delta = MaskDelta::new(
            (start..start + len).map(|t| (0, t)).collect(),
            DeltaSource::Contaminated,
        );
        let holed = truth.hide(&delta).unwrap();
        let filled = linear_interp(&holed).unwrap();
        let a = truth.value(0, start - 1);
        let b = truth.value(0, start + len);
        for (offset, t) in (start..start + len).enumerate() {
            let expected = a + (b - a) * (offset + 1) as f64 / (len + 1) as f64;
            prop_assert!(
                (filled.value(0, t) - expected).abs() <= 1e-12 * expected.abs().max(1.0),
                "t={}: {} vs {}", t, filled.value(0, t), expected
            );
        }
    }

    #[test]
    fn cheap_imputers_fill_without_touching_observed(
        m in 2usize..6,
        n in 40usize..120,
        rate in 0.05f64..0.3,
        seed in any::<u64>(),
        algo_pick in 0usize..3,
    ) {
        let algo = ["mean", "linear-interp", "knn"][algo_pick];
        let truth = generate_synthetic(SyntheticKind::CorrelatedLowrank, m, n, 0.2, seed).unwrap();
        let (holed, delta) = contaminate(&truth, &ContaminationSpec::mono(rate, seed)).unwrap();
        let registry = Registry::with_builtins();
        let p = if algo == "knn" {
            params([("k", ParamValue::Int(1))])
        } else {
            ParamMap::new()
        };
        let run = registry.run(&holed, algo, &p, seed).unwrap();
        prop_assert_eq!(run.imputed.missing_count(), 0);
        for i in 0..m {
            for t in 0..n {
                if !holed.is_missing(i, t) {
                    prop_assert_eq!(run.imputed.value(i, t).to_bits(), holed.value(i, t).to_bits());
                }
            }
        }
        prop_assert_eq!(run.target.positions, delta.positions);
    }

    #[test]
    fn scores_ignore_untargeted_cells(
        seed in any::<u64>(),
        k in 3usize..12,
    ) {
        let truth = generate_synthetic(SyntheticKind::SinusoidMix, 3, 30, 0.2, seed).unwrap();
        let mut rng = rng_from_seed(seed);
        let mut targets = std::collections::BTreeSet::new();
        while targets.len() < k {
            targets.insert((rng.random_range(0..3usize), rng.random_range(0..30usize)));
        }
        let delta = MaskDelta::new(targets.iter().cloned().collect(), DeltaSource::Contaminated);
        let mut a = truth.rows().to_vec();
        for row in &mut a {
            for v in row.iter_mut() {
                *v += rng.random_range(-0.3..0.3);
            }
        }
        let mut b = a.clone();
        for (i, row) in b.iter_mut().enumerate() {
            for (t, v) in row.iter_mut().enumerate() {
                if !targets.contains(&(i, t)) {
                    *v = rng.random_range(-20.0..20.0);
                }
            }
        }
        let sa = score(&truth, &truth.with_values(a).unwrap(), &delta).unwrap();
        let sb = score(&truth, &truth.with_values(b).unwrap(), &delta).unwrap();
        prop_assert_eq!(sa.rmse.to_bits(), sb.rmse.to_bits());
        prop_assert_eq!(sa.mae.to_bits(), sb.mae.to_bits());
        prop_assert_eq!(sa.pearson.to_bits(), sb.pearson.to_bits());
        prop_assert_eq!(sa.mutual_information.to_bits(), sb.mutual_information.to_bits());
    }

    #[test]
    fn grid_size_is_the_domain_product(
        k_max in 1i64..6,
        step in 1i64..3,
        n_choices in 1usize..5,
        f_steps in 1u32..5,
    ) {
        let choices: Vec<_> = (0..n_choices)
            .map(|i| ParamValue::Int(i as i64 * 10))
            .collect();
        let space = SearchSpace::new()
            .with("a", ParamDomain::IntRange { min: 1, max: k_max, step: Some(step) })
            .with("b", ParamDomain::Choice { values: choices.clone() })
            .with("c", ParamDomain::FloatRange {
                min: 0.25,
                max: 0.25 * f64::from(f_steps),
                step: Some(0.25),
            });
        let a_len = (1..=k_max).step_by(step as usize).count();
        let expected = a_len * choices.len() * f_steps as usize;
        prop_assert_eq!(space.enumerate().unwrap().len(), expected);
    }

    #[test]
    fn seed_combination_separates_parts(
        a in prop::collection::vec(any::<u8>(), 0..12),
        b in prop::collection::vec(any::<u8>(), 1..12),
    ) {
        let joined = combine_seed(&[&a, &b]);
        prop_assert_eq!(joined, combine_seed(&[&a, &b]));
        // moving a boundary byte must change the hash: ("ab", "c") != ("a", "bc")
        let mut left = a.clone();
        left.extend_from_slice(&b[..1]);
        let shifted = combine_seed(&[&left, &b[1..]]);
        prop_assert_ne!(joined, shifted);
    }
}
