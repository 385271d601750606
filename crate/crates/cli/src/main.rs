//! `gapfill`: contamination, imputation, tuning, explanation, downstream
//! evaluation, and benchmarking from the command line.
//!
//! Exit codes: 0 success, 2 for configuration or flag domain errors
//! (message names the offending section and key), 1 for runtime failures
//! (message names the failing stage).

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use gapfill::bench::{emit_plot_data, emit_report, run_benchmark, PlotKind, ReportFormat};
use gapfill::dataset::{Dataset, Orientation};
use gapfill::downstream::{evaluate_downstream, Forecaster};
use gapfill::error::Error;
use gapfill::explain::explain_algorithm;
use gapfill::gengap::{
    contaminate, mask_stats, Arrangement, ContaminationSpec, PatternKind, Placement,
};
use gapfill::impute::{ParamMap, ParamValue, Registry};
use gapfill::optimize::{tune, SearchSpace, Strategy, TuneMetric};
use gapfill::pipeline::{build_bench_plan, run_pipeline_file, BenchConfig};

#[derive(Parser)]
#[command(
    name = "gapfill",
    version,
    about = "Time series imputation engine and benchmark harness",
    propagate_version = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum OrientationArg {
    /// Each input line is one series.
    SeriesRows,
    /// Each input line is one time step.
    SeriesColumns,
}

impl From<OrientationArg> for Orientation {
    fn from(o: OrientationArg) -> Self {
        match o {
            OrientationArg::SeriesRows => Orientation::SeriesRows,
            OrientationArg::SeriesColumns => Orientation::SeriesColumns,
        }
    }
}

#[derive(Args)]
struct InputArgs {
    /// Input matrix (comma- or whitespace-separated; NaN cells are missing).
    #[arg(long = "in", value_name = "FILE")]
    input: PathBuf,
    /// Matrix orientation of the input file.
    #[arg(long, value_enum, default_value = "series-rows")]
    orientation: OrientationArg,
    /// Treat the first line as series names.
    #[arg(long)]
    header: bool,
}

impl InputArgs {
    fn load(&self) -> Result<Dataset, Error> {
        Dataset::load(&self.input, self.orientation.into(), self.header)
    }
}

#[derive(Args)]
struct ContaminationArgs {
    /// Missingness pattern.
    #[arg(long, value_enum, default_value = "mono-block")]
    kind: KindArg,
    /// Fraction of each contaminated series to hide, in [0.01, 0.80].
    #[arg(long, default_value_t = 0.2)]
    rate: f64,
    /// Fraction of series to contaminate, in (0, 1].
    #[arg(long, default_value_t = 1.0)]
    series_fraction: f64,
    /// Block arrangement (mono-block only).
    #[arg(long, value_enum, default_value = "random")]
    arrangement: ArrangementArg,
    /// Gap length in cells (multi-block only).
    #[arg(long)]
    block_size: Option<usize>,
    /// Block placement weighting (multi-block only).
    #[arg(long, value_enum, default_value = "uniform")]
    placement: PlacementArg,
    /// Leading fraction of every series never contaminated, in [0, 0.5].
    #[arg(long, default_value_t = 0.1)]
    protected_prefix: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    MonoBlock,
    MultiBlock,
}

#[derive(Clone, Copy, ValueEnum)]
enum ArrangementArg {
    Random,
    Overlapping,
    Disjoint,
    Blackout,
}

#[derive(Clone, Copy, ValueEnum)]
enum PlacementArg {
    Uniform,
    Gaussian,
}

impl ContaminationArgs {
    fn to_spec(&self, seed: u64) -> Result<ContaminationSpec, Error> {
        let kind = match self.kind {
            KindArg::MonoBlock => PatternKind::MonoBlock,
            KindArg::MultiBlock => PatternKind::MultiBlock,
        };
        let block_size = match (kind, self.block_size) {
            (PatternKind::MonoBlock, _) => 1,
            (PatternKind::MultiBlock, Some(b)) => b,
            (PatternKind::MultiBlock, None) => {
                return Err(Error::Param("--block-size is required for multi-block".into()))
            }
        };
        let spec = ContaminationSpec {
            kind,
            rate: self.rate,
            series_fraction: self.series_fraction,
            arrangement: match self.arrangement {
                ArrangementArg::Random => Arrangement::Random,
                ArrangementArg::Overlapping => Arrangement::Overlapping,
                ArrangementArg::Disjoint => Arrangement::Disjoint,
                ArrangementArg::Blackout => Arrangement::Blackout,
            },
            block_size,
            placement: match self.placement {
                PlacementArg::Uniform => Placement::Uniform,
                PlacementArg::Gaussian => Placement::Gaussian,
            },
            protected_prefix: self.protected_prefix,
            seed,
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run a full pipeline from a JSON config file.
    Run {
        /// Pipeline config (JSON).
        #[arg(long, value_name = "FILE")]
        config: PathBuf,
        /// Output directory; overrides the config's `output.dir`.
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
        /// Master seed; overrides the config's `seed`.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Hide cells of a fully observed matrix under a missingness pattern.
    Contaminate {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        pattern: ContaminationArgs,
        /// Directory for contaminated.csv and mask_delta.json.
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Fill every missing cell of a matrix.
    Impute {
        #[command(flatten)]
        input: InputArgs,
        /// Algorithm name; see `list-algos`.
        #[arg(long)]
        algo: String,
        /// Algorithm parameter as name=value; repeatable.
        #[arg(long = "param", value_name = "NAME=VALUE")]
        params: Vec<String>,
        /// Output file for the completed matrix.
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Search an algorithm's parameter space against simulated gaps.
    Optimize {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long)]
        algo: String,
        /// Search space (JSON: {"name": {"type": "int-range", ...}}).
        #[arg(long, value_name = "FILE")]
        space: PathBuf,
        #[arg(long, value_enum, default_value = "grid")]
        strategy: StrategyArg,
        /// Trial count for the random strategy.
        #[arg(long, default_value_t = 20)]
        trials: usize,
        /// Candidate budget for successive halving.
        #[arg(long, default_value_t = 8)]
        budget: usize,
        #[arg(long, value_enum, default_value = "rmse")]
        metric: MetricArg,
        #[command(flatten)]
        pattern: ContaminationArgs,
        /// Output file for the tuning report (JSON); stdout when absent.
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Sweep datasets x patterns x rates x algorithms from a plan file.
    Benchmark {
        /// Benchmark plan (JSON).
        #[arg(long, value_name = "FILE")]
        plan: PathBuf,
        /// Directory for the report and plot files.
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "csv")]
        format: FormatArg,
        /// Also write per-dataset plot CSVs and SVG charts.
        #[arg(long)]
        plots: bool,
    },
    /// Attribute an algorithm's error to dataset characteristics.
    Explain {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long)]
        algo: String,
        #[arg(long = "param", value_name = "NAME=VALUE")]
        params: Vec<String>,
        /// Contamination rates of the surrogate training runs; repeatable.
        #[arg(long = "rate", value_name = "RATE", default_values_t = [0.1, 0.2, 0.4])]
        rates: Vec<f64>,
        /// Training runs per rate.
        #[arg(long, default_value_t = 8)]
        runs: usize,
        /// Output file for the explanation (JSON); stdout when absent.
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Compare forecast accuracy after imputing a contaminated train window.
    Downstream {
        #[command(flatten)]
        input: InputArgs,
        /// Forecasting model.
        #[arg(long, value_enum, default_value = "ses")]
        forecaster: ForecasterArg,
        /// Smoothing factor for ses, in (0, 1].
        #[arg(long, default_value_t = 0.3)]
        alpha: f64,
        /// Season length for seasonal-naive.
        #[arg(long, default_value_t = 12)]
        period: usize,
        /// Autoregressive order for ar.
        #[arg(long, default_value_t = 2)]
        order: usize,
        /// Imputation algorithms to compare; repeatable.
        #[arg(long = "algo", value_name = "NAME", default_values_t = ["mean".to_string(), "linear-interp".to_string(), "cdrec".to_string()])]
        algos: Vec<String>,
        /// Train fraction, in (0.5, 0.95].
        #[arg(long, default_value_t = 0.8)]
        split: f64,
        /// Forecast length; defaults to min(20, N/10).
        #[arg(long)]
        horizon: Option<usize>,
        #[command(flatten)]
        pattern: ContaminationArgs,
        /// Output file for the comparison (CSV); stdout when absent.
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// List the built-in imputation algorithms and their families.
    ListAlgos,
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    Grid,
    Random,
    SuccessiveHalving,
}

#[derive(Clone, Copy, ValueEnum)]
enum MetricArg {
    Rmse,
    Mae,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum ForecasterArg {
    NaiveLast,
    SeasonalNaive,
    Ses,
    Ar,
}

/// `--seed` flag first, then the IMPUTE_SEED environment variable, then 0.
fn resolve_seed(flag: Option<u64>) -> Result<u64, Error> {
    if let Some(s) = flag {
        return Ok(s);
    }
    match std::env::var("IMPUTE_SEED") {
        Ok(raw) => raw.trim().parse().map_err(|_| {
            Error::Param(format!("IMPUTE_SEED must be an unsigned integer, got `{raw}`"))
        }),
        Err(_) => Ok(0),
    }
}

fn parse_params(pairs: &[String]) -> Result<ParamMap, Error> {
    let mut map = ParamMap::new();
    for pair in pairs {
        let (name, value) = pair
            .split_once('=')
            .ok_or_else(|| Error::Param(format!("expected NAME=VALUE, got `{pair}`")))?;
        let value = value.trim();
        let parsed = if let Ok(i) = value.parse::<i64>() {
            ParamValue::Int(i)
        } else if let Ok(f) = value.parse::<f64>() {
            ParamValue::Float(f)
        } else {
            return Err(Error::Param(format!("`{name}` value `{value}` is not a number")));
        };
        map.insert(name.trim().to_string(), parsed);
    }
    Ok(map)
}

fn write_or_print(out: Option<&Path>, text: &str) -> Result<(), Error> {
    match out {
        Some(path) => {
            std::fs::write(path, text)?;
            Ok(())
        }
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn to_json<T: Serialize>(value: &T) -> Result<String, Error> {
    serde_json::to_string_pretty(value).map_err(|e| Error::Data(e.to_string()))
}

fn dispatch(cli: Cli) -> Result<(), Error> {
    let registry = Registry::with_builtins();
    match cli.command {
        Command::Run { config, out, seed } => {
            let seed = match seed {
                Some(s) => Some(s),
                None => match std::env::var("IMPUTE_SEED") {
                    Ok(raw) => Some(raw.trim().parse().map_err(|_| {
                        Error::Param(format!(
                            "IMPUTE_SEED must be an unsigned integer, got `{raw}`"
                        ))
                    })?),
                    Err(_) => None,
                },
            };
            let outcome = run_pipeline_file(&registry, &config, seed, out.as_deref())?;
            println!("wrote {} artifacts to {}", outcome.manifest.checksums.len() + 1, outcome.out_dir.display());
            for (algo, metrics) in &outcome.scores {
                let parts: Vec<String> = metrics
                    .iter()
                    .map(|(m, v)| match v {
                        Some(v) => format!("{m}={v:.6}"),
                        None => format!("{m}=degenerate"),
                    })
                    .collect();
                println!("{algo}: {}", parts.join(" "));
            }
            Ok(())
        }
        Command::Contaminate { input, pattern, out, seed } => {
            let seed = resolve_seed(seed)?;
            let spec = pattern.to_spec(seed)?;
            let truth = input.load()?;
            let (holed, delta) = contaminate(&truth, &spec)?;
            std::fs::create_dir_all(&out)?;
            holed.save(out.join("contaminated.csv"))?;
            std::fs::write(out.join("mask_delta.json"), to_json(&delta)?)?;
            let summary = mask_stats(&delta, &holed)?;
            println!(
                "hid {} cells in {} of {} series, {} blocks",
                delta.len(),
                summary.per_series_missing.iter().filter(|&&c| c > 0).count(),
                holed.n_series(),
                summary.block_count
            );
            Ok(())
        }
        Command::Impute { input, algo, params, out, seed } => {
            let seed = resolve_seed(seed)?;
            let holed = input.load()?;
            let params = parse_params(&params)?;
            let run = registry.run(&holed, &algo, &params, seed)?;
            run.imputed.save(&out)?;
            println!(
                "filled {} cells with {} in {:.3}s",
                run.target.len(),
                run.algorithm,
                run.runtime_seconds
            );
            Ok(())
        }
        Command::Optimize {
            input,
            algo,
            space,
            strategy,
            trials,
            budget,
            metric,
            pattern,
            out,
            seed,
        } => {
            let seed = resolve_seed(seed)?;
            let spec = pattern.to_spec(seed)?;
            let truth = input.load()?;
            let text = std::fs::read_to_string(&space)?;
            let space: SearchSpace = serde_json::from_str(&text)
                .map_err(|e| Error::Param(format!("search space: {e}")))?;
            let strategy = match strategy {
                StrategyArg::Grid => Strategy::Grid,
                StrategyArg::Random => Strategy::Random { n_trials: trials },
                StrategyArg::SuccessiveHalving => Strategy::SuccessiveHalving { budget },
            };
            let metric = match metric {
                MetricArg::Rmse => TuneMetric::Rmse,
                MetricArg::Mae => TuneMetric::Mae,
            };
            let result = tune(&registry, &truth, &algo, &space, &strategy, &spec, metric, seed)?;
            eprintln!(
                "best {} = {:.6} after {} trials",
                result.metric.label(),
                result.best_score,
                result.trials.len()
            );
            write_or_print(out.as_deref(), &to_json(&result)?)
        }
        Command::Benchmark { plan, out, format, plots } => {
            let config = BenchConfig::load(&plan)?;
            let plan = build_bench_plan(&config)?;
            let report = run_benchmark(&registry, &plan)?;
            std::fs::create_dir_all(&out)?;
            let (name, format) = match format {
                FormatArg::Csv => ("report.csv", ReportFormat::Csv),
                FormatArg::Json => ("report.json", ReportFormat::Json),
            };
            emit_report(&report, format, &out.join(name))?;
            let mut written = 1;
            if plots {
                let dir = out.join("plots");
                written += emit_plot_data(&report, PlotKind::MetricVsRate, &dir)?.len();
                written += emit_plot_data(&report, PlotKind::RuntimeVsRate, &dir)?.len();
            }
            println!("{} measurement rows, {} files under {}", report.rows.len(), written, out.display());
            Ok(())
        }
        Command::Explain { input, algo, params, rates, runs, out, seed } => {
            let seed = resolve_seed(seed)?;
            let truth = input.load()?;
            let params = parse_params(&params)?;
            let explanation =
                explain_algorithm(&registry, &truth, &truth, &algo, &params, &rates, runs, seed)?;
            write_or_print(out.as_deref(), &to_json(&explanation)?)
        }
        Command::Downstream {
            input,
            forecaster,
            alpha,
            period,
            order,
            algos,
            split,
            horizon,
            pattern,
            out,
            seed,
        } => {
            let seed = resolve_seed(seed)?;
            let spec = pattern.to_spec(seed)?;
            let truth = input.load()?;
            let forecaster = match forecaster {
                ForecasterArg::NaiveLast => Forecaster::NaiveLast,
                ForecasterArg::SeasonalNaive => Forecaster::SeasonalNaive { period },
                ForecasterArg::Ses => Forecaster::Ses { alpha },
                ForecasterArg::Ar => Forecaster::Ar { order },
            };
            let algorithms: Vec<(String, ParamMap)> =
                algos.into_iter().map(|name| (name, ParamMap::new())).collect();
            let report = evaluate_downstream(
                &registry,
                &truth,
                &algorithms,
                &forecaster,
                &spec,
                split,
                horizon,
                seed,
            )?;
            let mut text = String::from("algorithm,forecaster,mae,smape\n");
            for row in &report.rows {
                text.push_str(&format!(
                    "{},{},{},{}\n",
                    row.algorithm, row.forecaster, row.mae, row.smape
                ));
            }
            write_or_print(out.as_deref(), text.trim_end())
        }
        Command::ListAlgos => {
            for algo in registry.algorithms() {
                println!("{}\t{}", algo.name, algo.family);
            }
            Ok(())
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Validation { .. }
        | Error::Spec(_)
        | Error::Param(_)
        | Error::UnknownAlgorithm(_) => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            match &e {
                Error::Validation { section, key, msg } => {
                    eprintln!("error: invalid config at {section}.{key}: {msg}")
                }
                Error::Stage { stage, source } => {
                    eprintln!("error: stage `{stage}` failed: {source}")
                }
                other => eprintln!("error: {other}"),
            }
            ExitCode::from(exit_code(&e))
        }
    }
}
