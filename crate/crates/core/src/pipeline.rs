//! Configuration-driven end-to-end runs.
//!
//! A single JSON config describes dataset, contamination, imputation,
//! scoring, and the optional explain / downstream stages. The run emits a
//! fixed set of artifacts into one output directory plus a manifest with
//! the fully resolved config, every derived seed, and a checksum per
//! artifact. Identical configs reproduce identical artifacts; only the
//! manifest timestamp moves.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bench::BenchMetric;
use crate::dataset::{Dataset, Normalization, Orientation};
use crate::downstream::{default_horizon, evaluate_downstream, Forecaster, DEFAULT_SPLIT};
use crate::error::{Error, Result};
use crate::explain::{explain_algorithm, MIN_TRAIN_ROWS};
use crate::gengap::{
    contaminate, Arrangement, ContaminationSpec, PatternKind, Placement, DEFAULT_PROTECTED_PREFIX,
};
use crate::impute::{ParamMap, Registry};
use crate::metrics::masked_pairs;
use crate::optimize::{tune, SearchSpace, Strategy, TuneMetric};
use crate::seed::combine_seed;
use crate::synthetic::{generate_synthetic, SyntheticKind};

fn invalid(section: &str, key: &str, msg: impl Into<String>) -> Error {
    Error::Validation { section: section.into(), key: key.into(), msg: msg.into() }
}

/// Where the input matrix comes from: a delimited text file or a synthetic
/// generator. Exactly one of the two must be set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceConfig {
    #[serde(default)]
    pub path: Option<PathBuf>,
    #[serde(default)]
    pub synthetic: Option<SyntheticConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticConfig {
    pub kind: SyntheticKind,
    pub series: usize,
    pub points: usize,
    #[serde(default)]
    pub noise_std: f64,
}

fn default_orientation() -> Orientation {
    Orientation::SeriesRows
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub source: SourceConfig,
    #[serde(default = "default_orientation")]
    pub orientation: Orientation,
    #[serde(default)]
    pub normalization: Normalization,
    /// Whether a loaded file carries a header line of series names.
    /// Defaults to false, matching the headerless matrices this crate
    /// writes.
    #[serde(default)]
    pub header: bool,
}

fn default_kind() -> PatternKind {
    PatternKind::MonoBlock
}

fn default_series_fraction() -> f64 {
    1.0
}

fn default_prefix() -> f64 {
    DEFAULT_PROTECTED_PREFIX
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContaminationConfig {
    #[serde(default = "default_kind")]
    pub kind: PatternKind,
    pub rate: f64,
    #[serde(default = "default_series_fraction")]
    pub series_fraction: f64,
    #[serde(default)]
    pub arrangement: Arrangement,
    /// Required for multi-block, ignored for mono-block.
    #[serde(default)]
    pub block_size: Option<usize>,
    #[serde(default)]
    pub placement: Placement,
    #[serde(default = "default_prefix")]
    pub protected_prefix: f64,
}

impl ContaminationConfig {
    /// Builds the runtime spec; the seed is always derived, never configured.
    pub fn to_spec(&self, seed: u64) -> Result<ContaminationSpec> {
        let block_size = match (self.kind, self.block_size) {
            (PatternKind::MonoBlock, _) => 1,
            (PatternKind::MultiBlock, Some(b)) => b,
            (PatternKind::MultiBlock, None) => {
                return Err(invalid(
                    "contamination",
                    "block_size",
                    "multi-block contamination needs a block_size",
                ))
            }
        };
        Ok(ContaminationSpec {
            kind: self.kind,
            rate: self.rate,
            series_fraction: self.series_fraction,
            arrangement: self.arrangement,
            block_size,
            placement: self.placement,
            protected_prefix: self.protected_prefix,
            seed,
        })
    }
}

fn default_tune_metric() -> TuneMetric {
    TuneMetric::Rmse
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TuneConfig {
    pub space: SearchSpace,
    pub strategy: Strategy,
    #[serde(default = "default_tune_metric")]
    pub metric: TuneMetric,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgorithmConfig {
    pub name: String,
    #[serde(default)]
    pub params: ParamMap,
    #[serde(default)]
    pub tune: Option<TuneConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImputationConfig {
    pub algorithms: Vec<AlgorithmConfig>,
}

fn default_explain_rates() -> Vec<f64> {
    vec![0.1, 0.2, 0.4]
}

fn default_explain_runs() -> usize {
    8
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplainConfig {
    /// Defaults to the first imputation algorithm.
    #[serde(default)]
    pub algorithm: Option<String>,
    /// Contamination rates of the surrogate training runs.
    #[serde(default = "default_explain_rates")]
    pub rates: Vec<f64>,
    /// Training runs per rate.
    #[serde(default = "default_explain_runs")]
    pub runs: usize,
}

fn default_split() -> f64 {
    DEFAULT_SPLIT
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DownstreamConfig {
    pub forecaster: Forecaster,
    /// Defaults to the imputation algorithm list.
    #[serde(default)]
    pub algorithms: Option<Vec<AlgorithmConfig>>,
    #[serde(default = "default_split")]
    pub split: f64,
    /// Defaults to min(20, N/10).
    #[serde(default)]
    pub horizon: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ArtifactFormat {
    Csv,
    Json,
}

fn default_formats() -> Vec<ArtifactFormat> {
    vec![ArtifactFormat::Csv]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// May instead be supplied as a CLI argument.
    #[serde(default)]
    pub dir: Option<PathBuf>,
    /// `csv` is always written; adding `json` duplicates tabular artifacts
    /// as JSON.
    #[serde(default = "default_formats")]
    pub formats: Vec<ArtifactFormat>,
    /// Also render a missingness map of the contaminated matrix.
    #[serde(default)]
    pub plots: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: None, formats: default_formats(), plots: false }
    }
}

fn default_metrics() -> Vec<BenchMetric> {
    vec![BenchMetric::Rmse, BenchMetric::Mae]
}

/// The whole pipeline description. Unknown keys are rejected at every
/// level, and nothing is written before the full config validates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(default)]
    pub seed: Option<u64>,
    pub dataset: DatasetConfig,
    pub contamination: ContaminationConfig,
    pub imputation: ImputationConfig,
    #[serde(default = "default_metrics")]
    pub metrics: Vec<BenchMetric>,
    #[serde(default)]
    pub explain: Option<ExplainConfig>,
    #[serde(default)]
    pub downstream: Option<DownstreamConfig>,
    #[serde(default)]
    pub output: OutputConfig,
}

impl PipelineConfig {
    /// Parses a config file, rejecting unknown keys with the offending name.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())?;
        serde_json::from_str(&text).map_err(|e| invalid("config", "parse", e.to_string()))
    }

    /// Full config validation; called before any stage runs or file is
    /// written. Resolves CLI overrides into the returned copy.
    pub fn resolve(&self, seed_override: Option<u64>, out_override: Option<&Path>) -> Result<PipelineConfig> {
        let mut cfg = self.clone();
        cfg.seed = Some(seed_override.or(self.seed).unwrap_or(0));
        if let Some(dir) = out_override {
            cfg.output.dir = Some(dir.to_path_buf());
        }
        if cfg.output.dir.is_none() {
            return Err(invalid("output", "dir", "no output directory configured"));
        }

        let src = &cfg.dataset.source;
        match (&src.path, &src.synthetic) {
            (Some(_), Some(_)) => {
                return Err(invalid("dataset", "source", "set either path or synthetic, not both"))
            }
            (None, None) => {
                return Err(invalid("dataset", "source", "set one of path or synthetic"))
            }
            (None, Some(s)) => {
                if s.series == 0 || s.points < 3 {
                    return Err(invalid(
                        "dataset",
                        "synthetic",
                        "need at least 1 series and 3 points",
                    ));
                }
                if !(s.noise_std.is_finite() && s.noise_std >= 0.0) {
                    return Err(invalid("dataset", "synthetic", "noise_std must be >= 0"));
                }
            }
            (Some(_), None) => {}
        }

        let c = &cfg.contamination;
        if !(0.01..=0.80).contains(&c.rate) {
            return Err(invalid(
                "contamination",
                "rate",
                format!("rate must lie in [0.01, 0.80], got {}", c.rate),
            ));
        }
        if !(c.series_fraction > 0.0 && c.series_fraction <= 1.0) {
            return Err(invalid(
                "contamination",
                "series_fraction",
                "series_fraction must lie in (0, 1]",
            ));
        }
        if !(0.0..=0.5).contains(&c.protected_prefix) {
            return Err(invalid(
                "contamination",
                "protected_prefix",
                "protected_prefix must lie in [0, 0.5]",
            ));
        }
        c.to_spec(0)?.validate().map_err(|e| invalid("contamination", "spec", e.to_string()))?;

        let registry = Registry::with_builtins();
        if cfg.imputation.algorithms.is_empty() {
            return Err(invalid("imputation", "algorithms", "need at least one algorithm"));
        }
        for algo in &cfg.imputation.algorithms {
            if !registry.contains(&algo.name) {
                return Err(invalid(
                    "imputation",
                    "algorithms",
                    format!("unknown algorithm `{}`", algo.name),
                ));
            }
            if let Some(tune_cfg) = &algo.tune {
                tune_cfg
                    .space
                    .validate()
                    .map_err(|e| invalid("imputation", "tune.space", e.to_string()))?;
            }
        }

        if cfg.metrics.is_empty() {
            return Err(invalid("metrics", "metrics", "need at least one metric"));
        }

        if let Some(explain) = &mut cfg.explain {
            let fallback = cfg.imputation.algorithms[0].name.clone();
            let name = explain.algorithm.get_or_insert(fallback);
            if !cfg.imputation.algorithms.iter().any(|a| &a.name == name) {
                return Err(invalid(
                    "explain",
                    "algorithm",
                    format!("`{name}` is not in the imputation list"),
                ));
            }
            if explain.rates.is_empty()
                || explain.rates.iter().any(|r| !(0.01..=0.80).contains(r))
            {
                return Err(invalid("explain", "rates", "rates must lie in [0.01, 0.80]"));
            }
            if explain.runs == 0 || explain.runs * explain.rates.len() < MIN_TRAIN_ROWS {
                return Err(invalid(
                    "explain",
                    "runs",
                    format!("runs x rates must reach {MIN_TRAIN_ROWS} training rows"),
                ));
            }
        }

        if let Some(ds) = &mut cfg.downstream {
            if !(ds.split > 0.5 && ds.split <= 0.95) {
                return Err(invalid("downstream", "split", "split must lie in (0.5, 0.95]"));
            }
            match &ds.forecaster {
                Forecaster::SeasonalNaive { period } if *period == 0 => {
                    return Err(invalid("downstream", "forecaster", "period must be >= 1"))
                }
                Forecaster::Ses { alpha } if !(*alpha > 0.0 && *alpha <= 1.0) => {
                    return Err(invalid("downstream", "forecaster", "alpha must lie in (0, 1]"))
                }
                Forecaster::Ar { order } if *order == 0 => {
                    return Err(invalid("downstream", "forecaster", "order must be >= 1"))
                }
                _ => {}
            }
            if ds.algorithms.is_none() {
                ds.algorithms = Some(
                    cfg.imputation
                        .algorithms
                        .iter()
                        .map(|a| AlgorithmConfig {
                            name: a.name.clone(),
                            params: a.params.clone(),
                            tune: None,
                        })
                        .collect(),
                );
            }
            for algo in ds.algorithms.as_ref().unwrap() {
                if !registry.contains(&algo.name) {
                    return Err(invalid(
                        "downstream",
                        "algorithms",
                        format!("unknown algorithm `{}`", algo.name),
                    ));
                }
            }
        }

        if cfg.output.formats.is_empty() {
            return Err(invalid("output", "formats", "need at least one format"));
        }
        Ok(cfg)
    }
}

fn default_repeats() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchDatasetConfig {
    pub name: String,
    pub source: SourceConfig,
    #[serde(default = "default_orientation")]
    pub orientation: Orientation,
    #[serde(default)]
    pub normalization: Normalization,
    #[serde(default)]
    pub header: bool,
}

/// A contamination template without a rate; the plan's `rates` axis fills
/// that in per cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchPatternConfig {
    #[serde(default = "default_kind")]
    pub kind: PatternKind,
    #[serde(default = "default_series_fraction")]
    pub series_fraction: f64,
    #[serde(default)]
    pub arrangement: Arrangement,
    #[serde(default)]
    pub block_size: Option<usize>,
    #[serde(default)]
    pub placement: Placement,
    #[serde(default = "default_prefix")]
    pub protected_prefix: f64,
}

impl BenchPatternConfig {
    fn to_spec(&self) -> Result<ContaminationSpec> {
        // the rate is a placeholder; every benchmark cell overrides it
        ContaminationConfig {
            kind: self.kind,
            rate: 0.2,
            series_fraction: self.series_fraction,
            arrangement: self.arrangement,
            block_size: self.block_size,
            placement: self.placement,
            protected_prefix: self.protected_prefix,
        }
        .to_spec(0)
    }
}

/// File form of a benchmark plan; [`build_bench_plan`] loads the datasets
/// and turns it into a runnable [`BenchPlan`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchConfig {
    pub datasets: Vec<BenchDatasetConfig>,
    pub patterns: Vec<BenchPatternConfig>,
    pub rates: Vec<f64>,
    pub algorithms: Vec<AlgorithmConfig>,
    #[serde(default = "default_metrics")]
    pub metrics: Vec<BenchMetric>,
    #[serde(default = "default_repeats")]
    pub repeats: usize,
    #[serde(default)]
    pub base_seed: u64,
}

impl BenchConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())?;
        serde_json::from_str(&text).map_err(|e| invalid("plan", "parse", e.to_string()))
    }
}

/// Loads the plan's datasets and assembles the benchmark grid. Synthetic
/// sources draw their seed from the plan's base seed and the dataset name.
pub fn build_bench_plan(cfg: &BenchConfig) -> Result<crate::bench::BenchPlan> {
    for algo in &cfg.algorithms {
        if algo.tune.is_some() {
            return Err(invalid(
                "plan",
                "algorithms",
                format!("`{}`: benchmark plans take fixed params, not tune specs", algo.name),
            ));
        }
    }
    let mut datasets = Vec::with_capacity(cfg.datasets.len());
    for d in &cfg.datasets {
        let ds_cfg = DatasetConfig {
            source: d.source.clone(),
            orientation: d.orientation,
            normalization: d.normalization,
            header: d.header,
        };
        let seed = stage_seed(cfg.base_seed, &["dataset", &d.name]);
        datasets.push((d.name.clone(), load_input(&ds_cfg, seed)?));
    }
    let patterns = cfg
        .patterns
        .iter()
        .map(|p| p.to_spec())
        .collect::<Result<Vec<_>>>()?;
    Ok(crate::bench::BenchPlan {
        datasets,
        patterns,
        rates: cfg.rates.clone(),
        algorithms: cfg.algorithms.iter().map(|a| (a.name.clone(), a.params.clone())).collect(),
        metrics: cfg.metrics.clone(),
        repeats: cfg.repeats,
        base_seed: cfg.base_seed,
    })
}

/// Run manifest: resolved config, derived seeds, and artifact checksums.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub unix_time_seconds: f64,
    pub config: PipelineConfig,
    pub seeds: BTreeMap<String, u64>,
    /// File name to SHA-256 hex digest, for every artifact but this one.
    pub checksums: BTreeMap<String, String>,
}

/// What a finished run produced.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutcome {
    pub out_dir: PathBuf,
    pub manifest: Manifest,
    /// Scores per algorithm and metric; `None` marks a degenerate metric.
    pub scores: BTreeMap<String, BTreeMap<String, Option<f64>>>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

struct ArtifactSink {
    dir: PathBuf,
    checksums: BTreeMap<String, String>,
}

impl ArtifactSink {
    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        std::fs::write(self.dir.join(name), bytes)?;
        self.checksums.insert(name.to_string(), sha256_hex(bytes));
        Ok(())
    }

    fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let text = serde_json::to_string_pretty(value)
            .map_err(|e| Error::Data(format!("{name}: {e}")))?;
        self.write(name, text.as_bytes())
    }
}

fn stage_seed(master: u64, parts: &[&str]) -> u64 {
    let master_bytes = master.to_le_bytes();
    let mut keys: Vec<&[u8]> = vec![&master_bytes];
    keys.extend(parts.iter().map(|p| p.as_bytes()));
    combine_seed(&keys)
}

fn load_input(cfg: &DatasetConfig, seed: u64) -> Result<Dataset> {
    let raw = match (&cfg.source.path, &cfg.source.synthetic) {
        (Some(path), None) => Dataset::load(path, cfg.orientation, cfg.header)?,
        (None, Some(s)) => generate_synthetic(s.kind, s.series, s.points, s.noise_std, seed)?,
        _ => unreachable!("resolve() enforces exactly one source"),
    };
    match cfg.normalization {
        Normalization::None => Ok(raw),
        method => raw.normalize(method),
    }
}

fn missingness_svg(ds: &Dataset) -> String {
    let (w, h) = (800.0, 500.0);
    let cell_w = w / ds.n_points() as f64;
    let cell_h = h / ds.n_series() as f64;
    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n<rect width=\"{w}\" height=\"{h}\" fill=\"#f4f4f4\"/>\n"
    );
    for i in 0..ds.n_series() {
        for (j, &missing) in ds.mask_row(i).iter().enumerate() {
            if missing {
                let _ = write!(
                    svg,
                    "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"#333\"/>\n",
                    j as f64 * cell_w,
                    i as f64 * cell_h,
                    cell_w,
                    cell_h
                );
            }
        }
    }
    svg.push_str("</svg>\n");
    svg
}

fn downstream_csv(report: &crate::downstream::DownstreamReport) -> String {
    let mut out = String::from("algorithm,forecaster,split,train_len,horizon,mae,smape\n");
    for row in &report.rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            row.algorithm,
            row.forecaster,
            report.split,
            report.train_len,
            report.horizon,
            row.mae,
            row.smape
        );
    }
    out
}

/// Runs every stage of a resolved config and writes all artifacts.
///
/// Stage failures come back as [`Error::Stage`] naming the stage; config
/// problems surface earlier, from [`PipelineConfig::resolve`], as
/// [`Error::Validation`].
pub fn run_pipeline(
    registry: &Registry,
    config: &PipelineConfig,
    seed_override: Option<u64>,
    out_override: Option<&Path>,
) -> Result<PipelineOutcome> {
    let cfg = config.resolve(seed_override, out_override)?;
    let master = cfg.seed.expect("resolved");
    let out_dir = cfg.output.dir.clone().expect("resolved");
    std::fs::create_dir_all(&out_dir)?;
    let mut sink = ArtifactSink { dir: out_dir.clone(), checksums: BTreeMap::new() };
    let mut seeds: BTreeMap<String, u64> = BTreeMap::new();
    seeds.insert("master".into(), master);
    let want_json = cfg.output.formats.contains(&ArtifactFormat::Json);

    // load
    let load_seed = stage_seed(master, &["load"]);
    seeds.insert("load".into(), load_seed);
    let truth = load_input(&cfg.dataset, load_seed).map_err(|e| Error::stage("load", e))?;

    // contaminate
    let mask_seed = stage_seed(master, &["contaminate"]);
    seeds.insert("contaminate".into(), mask_seed);
    let spec = cfg.contamination.to_spec(mask_seed)?;
    let (holed, delta) =
        contaminate(&truth, &spec).map_err(|e| Error::stage("contaminate", e))?;
    sink.write("contaminated.csv", holed.to_csv_string().as_bytes())?;
    sink.write_json("mask_delta.json", &delta)?;
    if cfg.output.plots {
        sink.write("missingness.svg", missingness_svg(&holed).as_bytes())?;
    }

    // impute, tuning first where configured
    let mut final_params: BTreeMap<String, ParamMap> = BTreeMap::new();
    let mut imputed: BTreeMap<String, Dataset> = BTreeMap::new();
    for algo in &cfg.imputation.algorithms {
        let mut params = algo.params.clone();
        if let Some(tune_cfg) = &algo.tune {
            let stage = format!("tune:{}", algo.name);
            let tune_seed = stage_seed(master, &["tune", &algo.name]);
            seeds.insert(stage.clone(), tune_seed);
            let tune_spec = spec.clone().with_seed(stage_seed(master, &["tune-mask", &algo.name]));
            let result = tune(
                registry,
                &truth,
                &algo.name,
                &tune_cfg.space,
                &tune_cfg.strategy,
                &tune_spec,
                tune_cfg.metric,
                tune_seed,
            )
            .map_err(|e| Error::stage(&stage, e))?;
            sink.write_json(&format!("tuning_{}.json", algo.name), &result)?;
            params.extend(result.best_params);
        }
        let stage = format!("impute:{}", algo.name);
        let impute_seed = stage_seed(master, &["impute", &algo.name]);
        seeds.insert(stage.clone(), impute_seed);
        let run = registry
            .run(&holed, &algo.name, &params, impute_seed)
            .map_err(|e| Error::stage(&stage, e))?;
        sink.write(&format!("imputed_{}.csv", algo.name), run.imputed.to_csv_string().as_bytes())?;
        final_params.insert(algo.name.clone(), run.params.clone());
        imputed.insert(algo.name.clone(), run.imputed);
    }

    // score
    let mut scores: BTreeMap<String, BTreeMap<String, Option<f64>>> = BTreeMap::new();
    for (name, matrix) in &imputed {
        let (xs, ys) = masked_pairs(&truth, matrix, &delta)
            .map_err(|e| Error::stage("score", e))?;
        let mut per_metric = BTreeMap::new();
        for metric in &cfg.metrics {
            per_metric.insert(metric.label().to_string(), metric.eval(&xs, &ys).ok());
        }
        scores.insert(name.clone(), per_metric);
    }
    sink.write_json("scores.json", &scores)?;

    // explain
    if let Some(explain_cfg) = &cfg.explain {
        let name = explain_cfg.algorithm.as_ref().expect("resolved").clone();
        let explain_seed = stage_seed(master, &["explain"]);
        seeds.insert("explain".into(), explain_seed);
        let params = final_params.get(&name).cloned().unwrap_or_default();
        let explanation = explain_algorithm(
            registry,
            &truth,
            &holed,
            &name,
            &params,
            &explain_cfg.rates,
            explain_cfg.runs,
            explain_seed,
        )
        .map_err(|e| Error::stage("explain", e))?;
        sink.write_json(&format!("explain_{name}.json"), &explanation)?;
    }

    // downstream
    if let Some(ds_cfg) = &cfg.downstream {
        let downstream_seed = stage_seed(master, &["downstream"]);
        seeds.insert("downstream".into(), downstream_seed);
        let algos: Vec<(String, ParamMap)> = ds_cfg
            .algorithms
            .as_ref()
            .expect("resolved")
            .iter()
            .map(|a| {
                let params = final_params.get(&a.name).cloned().unwrap_or(a.params.clone());
                (a.name.clone(), params)
            })
            .collect();
        let report = evaluate_downstream(
            registry,
            &truth,
            &algos,
            &ds_cfg.forecaster,
            &spec,
            ds_cfg.split,
            ds_cfg.horizon,
            downstream_seed,
        )
        .map_err(|e| Error::stage("downstream", e))?;
        sink.write("downstream.csv", downstream_csv(&report).as_bytes())?;
        if want_json {
            sink.write_json("downstream.json", &report)?;
        }
    }

    // manifest
    let mut resolved = cfg.clone();
    if let Some(ds_cfg) = &mut resolved.downstream {
        ds_cfg.horizon.get_or_insert_with(|| default_horizon(truth.n_points()));
    }
    let manifest = Manifest {
        unix_time_seconds: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs_f64())
            .unwrap_or(0.0),
        config: resolved,
        seeds,
        checksums: sink.checksums.clone(),
    };
    let text = serde_json::to_string_pretty(&manifest)
        .map_err(|e| Error::Data(format!("manifest: {e}")))?;
    std::fs::write(out_dir.join("manifest.json"), text)?;

    Ok(PipelineOutcome { out_dir, manifest, scores })
}

/// Loads, resolves, and runs a config file.
pub fn run_pipeline_file(
    registry: &Registry,
    config_path: &Path,
    seed_override: Option<u64>,
    out_override: Option<&Path>,
) -> Result<PipelineOutcome> {
    let config = PipelineConfig::load(config_path)?;
    run_pipeline(registry, &config, seed_override, out_override)
}
