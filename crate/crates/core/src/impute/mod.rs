//! Imputation algorithms and their dispatch.
//!
//! Six built-in algorithms span four families; external algorithms can be
//! added through [`Registry::register`]. Every run goes through the same
//! contract check: observed cells pass through bitwise unchanged and no
//! missing cell survives in the output.

mod knn;
mod matcomp;
mod pattern;
mod stats;

pub use knn::knn_impute;
pub use matcomp::{cdrec, centroid_reconstruct, soft_svd};
pub use pattern::pattern_window;
pub use stats::{linear_interp, mean_impute};

use std::collections::BTreeMap;
use std::fmt;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, DeltaSource, MaskDelta};
use crate::error::{Error, Result};

/// Algorithm family, mirroring the benchmark taxonomy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    Stats,
    Ml,
    PatternSearch,
    MatrixCompletion,
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Family::Stats => "stats",
            Family::Ml => "ml",
            Family::PatternSearch => "pattern-search",
            Family::MatrixCompletion => "matrix-completion",
        };
        f.write_str(s)
    }
}

/// Identity of an algorithm: its family plus a unique kebab-case name.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AlgorithmId {
    pub family: Family,
    pub name: String,
}

impl AlgorithmId {
    pub fn new(family: Family, name: impl Into<String>) -> Self {
        AlgorithmId { family, name: name.into() }
    }
}

impl fmt::Display for AlgorithmId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

/// A single hyperparameter value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Int(i64),
    Float(f64),
}

impl ParamValue {
    pub fn as_f64(&self) -> f64 {
        match *self {
            ParamValue::Int(v) => v as f64,
            ParamValue::Float(v) => v,
        }
    }
}

impl fmt::Display for ParamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamValue::Int(v) => write!(f, "{v}"),
            ParamValue::Float(v) => write!(f, "{v}"),
        }
    }
}

/// Hyperparameters keyed by name, with a stable iteration order.
pub type ParamMap = BTreeMap<String, ParamValue>;

/// Builds a [`ParamMap`] from `(name, value)` pairs.
pub fn params<I, K>(pairs: I) -> ParamMap
where
    I: IntoIterator<Item = (K, ParamValue)>,
    K: Into<String>,
{
    pairs.into_iter().map(|(k, v)| (k.into(), v)).collect()
}

/// Result of one imputation call.
#[derive(Debug, Clone)]
pub struct ImputationRun {
    pub algorithm: AlgorithmId,
    /// Parameters actually used, defaults resolved.
    pub params: ParamMap,
    /// Completed dataset: observed cells bitwise identical to the input,
    /// no missing cell left.
    pub imputed: Dataset,
    /// The cells that were filled.
    pub target: MaskDelta,
    pub runtime_seconds: f64,
    /// Inner iterations for iterative algorithms.
    pub iterations: Option<u64>,
}

/// What an algorithm implementation returns to the dispatcher.
pub struct ImputeOutput {
    pub imputed: Dataset,
    pub iterations: Option<u64>,
    /// Parameters after default resolution, echoed into the run record.
    pub resolved_params: ParamMap,
}

type ImputeFn = Box<dyn Fn(&Dataset, &ParamMap, u64) -> Result<ImputeOutput> + Send + Sync>;

/// Default neighbour count of `knn`.
pub const DEFAULT_KNN_K: usize = 5;
/// Default reference window of `pattern-window`: ceil(N / 10).
pub fn default_ref_len(n_points: usize) -> usize {
    n_points.div_ceil(10)
}
pub const DEFAULT_CDREC_RANK: usize = 3;
pub const DEFAULT_CDREC_EPS: f64 = 1e-6;
pub const DEFAULT_CDREC_MAX_ITER: u64 = 100;
pub const DEFAULT_SOFT_SVD_EPS: f64 = 1e-6;
pub const DEFAULT_SOFT_SVD_MAX_ITER: u64 = 200;
/// Default soft-svd shrinkage: this fraction of the largest singular value of
/// the initialised matrix.
pub const DEFAULT_SHRINKAGE_FACTOR: f64 = 0.1;

/// The six built-in algorithms, sorted by name.
pub fn builtin_algorithms() -> Vec<AlgorithmId> {
    vec![
        AlgorithmId::new(Family::MatrixCompletion, "cdrec"),
        AlgorithmId::new(Family::Ml, "knn"),
        AlgorithmId::new(Family::Stats, "linear-interp"),
        AlgorithmId::new(Family::Stats, "mean"),
        AlgorithmId::new(Family::PatternSearch, "pattern-window"),
        AlgorithmId::new(Family::MatrixCompletion, "soft-svd"),
    ]
}

/// Rejects parameter names outside `allowed`.
fn check_keys(params: &ParamMap, algorithm: &str, allowed: &[&str]) -> Result<()> {
    for key in params.keys() {
        if !allowed.contains(&key.as_str()) {
            return Err(Error::Param(format!(
                "unknown parameter `{key}` for {algorithm}; allowed: {}",
                if allowed.is_empty() { "none".to_string() } else { allowed.join(", ") }
            )));
        }
    }
    Ok(())
}

fn get_usize(params: &ParamMap, key: &str, default: usize) -> Result<usize> {
    match params.get(key) {
        None => Ok(default),
        Some(ParamValue::Int(v)) if *v >= 0 => Ok(*v as usize),
        Some(other) => Err(Error::Param(format!(
            "parameter `{key}` must be a non-negative integer, got {other}"
        ))),
    }
}

fn get_f64(params: &ParamMap, key: &str, default: f64) -> Result<f64> {
    match params.get(key) {
        None => Ok(default),
        Some(v) => {
            let x = v.as_f64();
            if x.is_finite() {
                Ok(x)
            } else {
                Err(Error::Param(format!("parameter `{key}` must be finite")))
            }
        }
    }
}

/// Dispatch table from algorithm name to implementation.
pub struct Registry {
    entries: BTreeMap<String, (Family, ImputeFn)>,
}

impl Registry {
    /// Registry preloaded with the six built-ins.
    pub fn with_builtins() -> Self {
        let mut r = Registry { entries: BTreeMap::new() };
        r.insert_builtin("mean", Family::Stats, |ds, p, _| {
            check_keys(p, "mean", &[])?;
            Ok(ImputeOutput {
                imputed: stats::mean_impute(ds)?,
                iterations: None,
                resolved_params: ParamMap::new(),
            })
        });
        r.insert_builtin("linear-interp", Family::Stats, |ds, p, _| {
            check_keys(p, "linear-interp", &[])?;
            Ok(ImputeOutput {
                imputed: stats::linear_interp(ds)?,
                iterations: None,
                resolved_params: ParamMap::new(),
            })
        });
        r.insert_builtin("knn", Family::Ml, |ds, p, _| {
            check_keys(p, "knn", &["k"])?;
            let k = get_usize(p, "k", DEFAULT_KNN_K)?;
            Ok(ImputeOutput {
                imputed: knn::knn_impute(ds, k)?,
                iterations: None,
                resolved_params: params([("k", ParamValue::Int(k as i64))]),
            })
        });
        r.insert_builtin("pattern-window", Family::PatternSearch, |ds, p, _| {
            check_keys(p, "pattern-window", &["ref_len"])?;
            let ref_len = get_usize(p, "ref_len", default_ref_len(ds.n_points()))?;
            Ok(ImputeOutput {
                imputed: pattern::pattern_window(ds, ref_len)?,
                iterations: None,
                resolved_params: params([("ref_len", ParamValue::Int(ref_len as i64))]),
            })
        });
        r.insert_builtin("cdrec", Family::MatrixCompletion, |ds, p, _| {
            check_keys(p, "cdrec", &["rank", "eps", "max_iter"])?;
            let rank = get_usize(p, "rank", DEFAULT_CDREC_RANK)?;
            let eps = get_f64(p, "eps", DEFAULT_CDREC_EPS)?;
            let max_iter = get_usize(p, "max_iter", DEFAULT_CDREC_MAX_ITER as usize)? as u64;
            let (imputed, iters) = matcomp::cdrec(ds, rank, eps, max_iter)?;
            Ok(ImputeOutput {
                imputed,
                iterations: Some(iters),
                resolved_params: params([
                    ("rank", ParamValue::Int(rank as i64)),
                    ("eps", ParamValue::Float(eps)),
                    ("max_iter", ParamValue::Int(max_iter as i64)),
                ]),
            })
        });
        r.insert_builtin("soft-svd", Family::MatrixCompletion, |ds, p, _| {
            check_keys(p, "soft-svd", &["shrinkage", "eps", "max_iter"])?;
            let shrinkage = p.get("shrinkage").map(|v| v.as_f64());
            let eps = get_f64(p, "eps", DEFAULT_SOFT_SVD_EPS)?;
            let max_iter = get_usize(p, "max_iter", DEFAULT_SOFT_SVD_MAX_ITER as usize)? as u64;
            let (imputed, iters, lambda) = matcomp::soft_svd(ds, shrinkage, eps, max_iter)?;
            Ok(ImputeOutput {
                imputed,
                iterations: Some(iters),
                resolved_params: params([
                    ("shrinkage", ParamValue::Float(lambda)),
                    ("eps", ParamValue::Float(eps)),
                    ("max_iter", ParamValue::Int(max_iter as i64)),
                ]),
            })
        });
        r
    }

    fn insert_builtin(
        &mut self,
        name: &str,
        family: Family,
        f: impl Fn(&Dataset, &ParamMap, u64) -> Result<ImputeOutput> + Send + Sync + 'static,
    ) {
        self.entries.insert(name.to_string(), (family, Box::new(f)));
    }

    /// Adds an external algorithm. Duplicate names, including built-in ones,
    /// are rejected.
    pub fn register(
        &mut self,
        family: Family,
        name: impl Into<String>,
        f: impl Fn(&Dataset, &ParamMap, u64) -> Result<ImputeOutput> + Send + Sync + 'static,
    ) -> Result<()> {
        let name = name.into();
        if self.entries.contains_key(&name) {
            return Err(Error::Registry(format!(
                "algorithm `{name}` is already registered"
            )));
        }
        self.entries.insert(name, (family, Box::new(f)));
        Ok(())
    }

    /// Registered algorithm identities, sorted by name.
    pub fn algorithms(&self) -> Vec<AlgorithmId> {
        self.entries
            .iter()
            .map(|(name, (family, _))| AlgorithmId::new(*family, name.clone()))
            .collect()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.contains_key(name)
    }

    /// Runs one algorithm over every missing cell of `ds`.
    ///
    /// The returned run records the filled cells as its target. After the
    /// algorithm returns, the dispatcher enforces the output contract:
    /// matching shape, bitwise pass-through on observed cells, and no
    /// remaining missing cell. Violations map to `Contract`.
    pub fn run(&self, ds: &Dataset, name: &str, params: &ParamMap, seed: u64) -> Result<ImputationRun> {
        let (family, f) = self.entries.get(name).ok_or_else(|| {
            let known: Vec<&str> = self.entries.keys().map(String::as_str).collect();
            Error::UnknownAlgorithm(format!("`{name}`; known: {}", known.join(", ")))
        })?;
        let target = MaskDelta::new(ds.masked_positions(), DeltaSource::Loaded);
        if target.positions.is_empty() {
            return Err(Error::NothingToImpute);
        }
        let start = Instant::now();
        let out = f(ds, params, seed)?;
        let runtime_seconds = start.elapsed().as_secs_f64();
        check_contract(ds, &out.imputed, name)?;
        Ok(ImputationRun {
            algorithm: AlgorithmId::new(*family, name),
            params: out.resolved_params,
            imputed: out.imputed,
            target,
            runtime_seconds,
            iterations: out.iterations,
        })
    }
}

impl Default for Registry {
    fn default() -> Self {
        Registry::with_builtins()
    }
}

fn check_contract(input: &Dataset, output: &Dataset, name: &str) -> Result<()> {
    if output.n_series() != input.n_series() || output.n_points() != input.n_points() {
        return Err(Error::Contract(format!(
            "{name} changed the dataset shape from {}x{} to {}x{}",
            input.n_series(),
            input.n_points(),
            output.n_series(),
            output.n_points()
        )));
    }
    for i in 0..input.n_series() {
        for j in 0..input.n_points() {
            if input.is_missing(i, j) {
                if output.is_missing(i, j) {
                    return Err(Error::Contract(format!(
                        "{name} left cell ({i}, {j}) missing"
                    )));
                }
                if !output.value(i, j).is_finite() {
                    return Err(Error::Contract(format!(
                        "{name} produced a non-finite value at ({i}, {j})"
                    )));
                }
            } else if input.value(i, j).to_bits() != output.value(i, j).to_bits() {
                return Err(Error::Contract(format!(
                    "{name} altered observed cell ({i}, {j})"
                )));
            }
        }
    }
    Ok(())
}

/// One-shot imputation with the built-in registry.
pub fn impute(ds: &Dataset, name: &str, params: &ParamMap, seed: u64) -> Result<ImputationRun> {
    Registry::with_builtins().run(ds, name, params, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gengap::{contaminate, ContaminationSpec};
    use crate::synthetic::{generate_synthetic, SyntheticKind};

    fn contaminated(seed: u64) -> (Dataset, Dataset, MaskDelta) {
        let truth = generate_synthetic(SyntheticKind::SinusoidMix, 8, 120, 0.05, seed).unwrap();
        let spec = ContaminationSpec::mono(0.15, seed);
        let (holed, delta) = contaminate(&truth, &spec).unwrap();
        (truth, holed, delta)
    }

    #[test]
    fn every_builtin_fills_all_cells_and_passes_through() {
        let (_, holed, _) = contaminated(1);
        for id in builtin_algorithms() {
            let run = impute(&holed, &id.name, &ParamMap::new(), 0).unwrap();
            assert_eq!(run.imputed.missing_count(), 0, "{}", id.name);
            assert_eq!(run.algorithm, id);
            for i in 0..holed.n_series() {
                for j in 0..holed.n_points() {
                    if !holed.is_missing(i, j) {
                        assert_eq!(
                            holed.value(i, j).to_bits(),
                            run.imputed.value(i, j).to_bits(),
                            "{} at ({i}, {j})",
                            id.name
                        );
                    }
                }
            }
            assert_eq!(run.target.positions, holed.masked_positions());
        }
    }

    #[test]
    fn unknown_algorithm_lists_known_names() {
        let (_, holed, _) = contaminated(2);
        let err = impute(&holed, "magic", &ParamMap::new(), 0).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("magic") && msg.contains("cdrec"), "{msg}");
    }

    #[test]
    fn unknown_param_rejected() {
        let (_, holed, _) = contaminated(3);
        let p = params([("neighbours", ParamValue::Int(3))]);
        assert!(matches!(
            impute(&holed, "knn", &p, 0),
            Err(Error::Param(_))
        ));
    }

    #[test]
    fn nothing_to_impute() {
        let full = generate_synthetic(SyntheticKind::Ar1, 2, 50, 0.1, 4).unwrap();
        assert!(matches!(
            impute(&full, "mean", &ParamMap::new(), 0),
            Err(Error::NothingToImpute)
        ));
    }

    #[test]
    fn duplicate_registration_rejected() {
        let mut reg = Registry::with_builtins();
        let err = reg
            .register(Family::Stats, "mean", |ds, _, _| {
                Ok(ImputeOutput {
                    imputed: ds.clone(),
                    iterations: None,
                    resolved_params: ParamMap::new(),
                })
            })
            .unwrap_err();
        assert!(matches!(err, Error::Registry(_)));
    }

    #[test]
    fn contract_violation_detected() {
        let mut reg = Registry::with_builtins();
        reg.register(Family::Stats, "zero-everything", |ds, _, _| {
            let zeros = vec![vec![0.0; ds.n_points()]; ds.n_series()];
            Ok(ImputeOutput {
                imputed: ds.with_values(zeros)?,
                iterations: None,
                resolved_params: ParamMap::new(),
            })
        })
        .unwrap();
        let (_, holed, _) = contaminated(5);
        assert!(matches!(
            reg.run(&holed, "zero-everything", &ParamMap::new(), 0),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn leaving_cells_missing_is_a_contract_error() {
        let mut reg = Registry::with_builtins();
        reg.register(Family::Stats, "lazy", |ds, _, _| {
            Ok(ImputeOutput {
                imputed: ds.clone(),
                iterations: None,
                resolved_params: ParamMap::new(),
            })
        })
        .unwrap();
        let (_, holed, _) = contaminated(6);
        assert!(matches!(
            reg.run(&holed, "lazy", &ParamMap::new(), 0),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn resolved_params_echo_defaults() {
        let (_, holed, _) = contaminated(7);
        let run = impute(&holed, "knn", &ParamMap::new(), 0).unwrap();
        assert_eq!(run.params.get("k"), Some(&ParamValue::Int(5)));
        let run = impute(&holed, "cdrec", &ParamMap::new(), 0).unwrap();
        assert_eq!(run.params.get("rank"), Some(&ParamValue::Int(3)));
        assert!(run.iterations.is_some());
    }

    #[test]
    fn builtin_listing_sorted_with_families() {
        let ids = builtin_algorithms();
        let names: Vec<&str> = ids.iter().map(|a| a.name.as_str()).collect();
        assert_eq!(
            names,
            ["cdrec", "knn", "linear-interp", "mean", "pattern-window", "soft-svd"]
        );
        assert_eq!(ids[0].family, Family::MatrixCompletion);
        assert_eq!(ids[1].family, Family::Ml);
    }
}
