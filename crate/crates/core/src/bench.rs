//! Grid benchmark: datasets x patterns x rates x repeats x algorithms.
//!
//! Every cell draws its own seed from a stable hash, so runs reproduce
//! bitwise and cells stay independent of each other and of the algorithm
//! set. Algorithm failures become rows with `status = "error"` instead of
//! aborting the grid.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::gengap::{contaminate, ContaminationSpec, PatternKind};
use crate::impute::{ParamMap, Registry};
use crate::metrics::{mae, masked_pairs, mutual_information, pearson, rmse};

/// Metrics a benchmark can record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BenchMetric {
    Rmse,
    Mae,
    Pearson,
    MutualInformation,
}

impl BenchMetric {
    pub fn label(&self) -> &'static str {
        match self {
            BenchMetric::Rmse => "rmse",
            BenchMetric::Mae => "mae",
            BenchMetric::Pearson => "pearson",
            BenchMetric::MutualInformation => "mutual_information",
        }
    }

    /// Applies the metric to an aligned (truth, imputed) pair list.
    pub fn eval(&self, xs: &[f64], ys: &[f64]) -> Result<f64> {
        match self {
            BenchMetric::Rmse => rmse(xs, ys),
            BenchMetric::Mae => mae(xs, ys),
            BenchMetric::Pearson => pearson(xs, ys),
            BenchMetric::MutualInformation => mutual_information(xs, ys),
        }
    }
}

/// Declarative benchmark grid.
#[derive(Debug, Clone)]
pub struct BenchPlan {
    pub datasets: Vec<(String, Dataset)>,
    /// Pattern templates; each cell overrides the template's rate and seed.
    pub patterns: Vec<ContaminationSpec>,
    pub rates: Vec<f64>,
    pub algorithms: Vec<(String, ParamMap)>,
    pub metrics: Vec<BenchMetric>,
    pub repeats: usize,
    pub base_seed: u64,
}

impl BenchPlan {
    /// Fail-fast validation of the whole grid before anything runs.
    pub fn validate(&self, registry: &Registry) -> Result<()> {
        if self.datasets.is_empty() {
            return Err(Error::Spec("benchmark needs at least one dataset".into()));
        }
        let mut names: Vec<&str> = self.datasets.iter().map(|(n, _)| n.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Spec("duplicate dataset name".into()));
        }
        if self.patterns.is_empty() {
            return Err(Error::Spec("benchmark needs at least one pattern".into()));
        }
        if self.rates.is_empty() {
            return Err(Error::Spec("benchmark needs at least one rate".into()));
        }
        if self.algorithms.is_empty() {
            return Err(Error::Spec("benchmark needs at least one algorithm".into()));
        }
        let mut algos: Vec<&str> = self.algorithms.iter().map(|(n, _)| n.as_str()).collect();
        algos.sort_unstable();
        if algos.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Spec("duplicate algorithm in benchmark".into()));
        }
        for (name, _) in &self.algorithms {
            if !registry.contains(name) {
                return Err(Error::UnknownAlgorithm(name.clone()));
            }
        }
        if self.metrics.is_empty() {
            return Err(Error::Spec("benchmark needs at least one metric".into()));
        }
        if self.repeats < 1 {
            return Err(Error::Spec("repeats must be at least 1".into()));
        }
        for pattern in &self.patterns {
            for &rate in &self.rates {
                pattern.clone().with_rate(rate).validate()?;
            }
        }
        Ok(())
    }

    /// Rows a full run will produce.
    pub fn expected_rows(&self) -> usize {
        self.datasets.len()
            * self.patterns.len()
            * self.rates.len()
            * self.repeats
            * self.algorithms.len()
            * self.metrics.len()
    }
}

/// Maps error-row NaN values to JSON null and back, since JSON has no NaN
/// literal.
mod nan_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_nan() {
            s.serialize_none()
        } else {
            s.serialize_some(v)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
    }
}

/// One measurement. `repeat` is `-1` on aggregate rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub dataset: String,
    pub pattern: String,
    pub arrangement: String,
    pub rate: f64,
    pub algorithm: String,
    pub repeat: i64,
    pub metric: String,
    #[serde(with = "nan_as_null")]
    pub value: f64,
    pub runtime_seconds: f64,
    pub seed: u64,
    pub status: String,
}

impl BenchRow {
    /// Equality that treats NaN values as equal to each other.
    pub fn same_measurement(&self, other: &BenchRow) -> bool {
        let values_match = self.value.to_bits() == other.value.to_bits()
            || (self.value.is_nan() && other.value.is_nan());
        values_match
            && self.dataset == other.dataset
            && self.pattern == other.pattern
            && self.arrangement == other.arrangement
            && self.rate == other.rate
            && self.algorithm == other.algorithm
            && self.repeat == other.repeat
            && self.metric == other.metric
            && self.seed == other.seed
            && self.status == other.status
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
}

fn pattern_labels(spec: &ContaminationSpec) -> (String, String) {
    let pattern = match spec.kind {
        PatternKind::MonoBlock => "mono-block",
        PatternKind::MultiBlock => "multi-block",
    };
    let arrangement = match spec.kind {
        PatternKind::MonoBlock => {
            serde_json::to_value(spec.arrangement).expect("plain enum").as_str().unwrap().to_string()
        }
        PatternKind::MultiBlock => {
            serde_json::to_value(spec.placement).expect("plain enum").as_str().unwrap().to_string()
        }
    };
    (pattern.to_string(), arrangement)
}

/// Deterministic seed of one benchmark cell.
pub fn cell_seed(base_seed: u64, dataset: &str, pattern_index: usize, rate: f64, repeat: usize) -> u64 {
    crate::seed::combine_seed(&[
        &base_seed.to_le_bytes(),
        dataset.as_bytes(),
        &(pattern_index as u64).to_le_bytes(),
        &rate.to_bits().to_le_bytes(),
        &(repeat as u64).to_le_bytes(),
    ])
}

/// Runs the whole grid. Within a cell every algorithm sees the identical
/// contaminated matrix; a failing algorithm yields error rows for exactly
/// its own cell.
pub fn run_benchmark(registry: &Registry, plan: &BenchPlan) -> Result<BenchReport> {
    plan.validate(registry)?;
    let mut keyed: Vec<((usize, usize, usize, usize, usize, usize), BenchRow)> =
        Vec::with_capacity(plan.expected_rows());
    for (d_idx, (ds_name, truth)) in plan.datasets.iter().enumerate() {
        for (p_idx, pattern) in plan.patterns.iter().enumerate() {
            let (pattern_label, arrangement_label) = pattern_labels(pattern);
            for (r_idx, &rate) in plan.rates.iter().enumerate() {
                for repeat in 0..plan.repeats {
                    let seed = cell_seed(plan.base_seed, ds_name, p_idx, rate, repeat);
                    let spec = pattern.clone().with_rate(rate).with_seed(seed);
                    let cell = contaminate(truth, &spec);
                    for (a_idx, (algo, params)) in plan.algorithms.iter().enumerate() {
                        let outcome = cell.as_ref().map_err(|e| e.to_string()).and_then(
                            |(holed, delta)| {
                                let run = registry
                                    .run(holed, algo, params, seed)
                                    .map_err(|e| e.to_string())?;
                                let pairs = masked_pairs(truth, &run.imputed, delta)
                                    .map_err(|e| e.to_string())?;
                                Ok((run.runtime_seconds, pairs))
                            },
                        );
                        for (m_idx, metric) in plan.metrics.iter().enumerate() {
                            let row = |value: f64, runtime: f64, status: &str| BenchRow {
                                dataset: ds_name.clone(),
                                pattern: pattern_label.clone(),
                                arrangement: arrangement_label.clone(),
                                rate,
                                algorithm: algo.clone(),
                                repeat: repeat as i64,
                                metric: metric.label().to_string(),
                                value,
                                runtime_seconds: runtime,
                                seed,
                                status: status.to_string(),
                            };
                            let made = match &outcome {
                                Err(_) => row(f64::NAN, 0.0, "error"),
                                Ok((runtime, (xs, ys))) => match metric.eval(xs, ys) {
                                    Ok(value) => row(value, *runtime, "ok"),
                                    Err(_) => row(f64::NAN, *runtime, "error"),
                                },
                            };
                            keyed.push(((d_idx, p_idx, r_idx, a_idx, repeat, m_idx), made));
                        }
                    }
                }
            }
        }
    }
    // fixed report order regardless of execution order
    keyed.sort_by(|a, b| a.0.cmp(&b.0));
    Ok(BenchReport { rows: keyed.into_iter().map(|(_, r)| r).collect() })
}

/// Mean and population-std rows over the repeats of each cell, restricted
/// to `status = "ok"` measurements. Aggregates carry `repeat = -1` and a
/// `:mean` / `:std` metric suffix.
pub fn aggregate(report: &BenchReport) -> Vec<BenchRow> {
    let mut groups: BTreeMap<(String, String, String, u64, String, String), Vec<&BenchRow>> =
        BTreeMap::new();
    for row in &report.rows {
        if row.status != "ok" || row.repeat < 0 {
            continue;
        }
        groups
            .entry((
                row.dataset.clone(),
                row.pattern.clone(),
                row.arrangement.clone(),
                row.rate.to_bits(),
                row.algorithm.clone(),
                row.metric.clone(),
            ))
            .or_default()
            .push(row);
    }
    let mut out = Vec::with_capacity(groups.len() * 2);
    for ((dataset, pattern, arrangement, rate_bits, algorithm, metric), rows) in groups {
        let n = rows.len() as f64;
        let mean = rows.iter().map(|r| r.value).sum::<f64>() / n;
        let var = rows.iter().map(|r| (r.value - mean) * (r.value - mean)).sum::<f64>() / n;
        let runtime = rows.iter().map(|r| r.runtime_seconds).sum::<f64>() / n;
        let base = BenchRow {
            dataset,
            pattern,
            arrangement,
            rate: f64::from_bits(rate_bits),
            algorithm,
            repeat: -1,
            metric: metric.clone(),
            value: mean,
            runtime_seconds: runtime,
            seed: 0,
            status: "ok".into(),
        };
        out.push(BenchRow { metric: format!("{metric}:mean"), ..base.clone() });
        out.push(BenchRow { metric: format!("{metric}:std"), value: var.sqrt(), ..base });
    }
    out
}

/// Exact column order of the report CSV.
pub const CSV_HEADER: [&str; 11] = [
    "dataset",
    "pattern",
    "arrangement",
    "rate",
    "algorithm",
    "repeat",
    "metric",
    "value",
    "runtime_seconds",
    "seed",
    "status",
];

/// Writes measurement rows followed by aggregate rows.
pub fn write_csv(report: &BenchReport, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(CSV_HEADER)?;
    for row in report.rows.iter().chain(aggregate(report).iter()) {
        w.write_record([
            row.dataset.as_str(),
            row.pattern.as_str(),
            row.arrangement.as_str(),
            &format!("{}", row.rate),
            row.algorithm.as_str(),
            &format!("{}", row.repeat),
            row.metric.as_str(),
            &format!("{}", row.value),
            &format!("{}", row.runtime_seconds),
            &format!("{}", row.seed),
            row.status.as_str(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReportFormat {
    Csv,
    Json,
}

/// Writes measurement plus aggregate rows either as CSV or as a JSON array
/// of the same records.
pub fn emit_report(report: &BenchReport, format: ReportFormat, path: &Path) -> Result<()> {
    match format {
        ReportFormat::Csv => write_csv(report, path),
        ReportFormat::Json => {
            let mut all = report.rows.clone();
            all.extend(aggregate(report));
            let text = serde_json::to_string_pretty(&all)
                .map_err(|e| Error::Data(format!("report serialization: {e}")))?;
            std::fs::write(path, text)?;
            Ok(())
        }
    }
}

fn field<'a, T: FromStr>(record: &'a csv::StringRecord, idx: usize, name: &str) -> Result<T> {
    let raw = record
        .get(idx)
        .ok_or_else(|| Error::Parse { line: 0, msg: format!("missing column `{name}`") })?;
    raw.parse().map_err(|_| Error::Parse {
        line: record.position().map_or(0, |p| p.line() as usize),
        msg: format!("bad `{name}` value `{raw}`"),
    })
}

/// Reads rows back from an emitted CSV report.
pub fn read_rows_csv(path: &Path) -> Result<Vec<BenchRow>> {
    let mut reader = csv::Reader::from_path(path)?;
    let headers: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if headers != CSV_HEADER {
        return Err(Error::Parse { line: 1, msg: format!("unexpected header {headers:?}") });
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        rows.push(BenchRow {
            dataset: field(&record, 0, "dataset")?,
            pattern: field(&record, 1, "pattern")?,
            arrangement: field(&record, 2, "arrangement")?,
            rate: field(&record, 3, "rate")?,
            algorithm: field(&record, 4, "algorithm")?,
            repeat: field(&record, 5, "repeat")?,
            metric: field(&record, 6, "metric")?,
            value: field(&record, 7, "value")?,
            runtime_seconds: field(&record, 8, "runtime_seconds")?,
            seed: field(&record, 9, "seed")?,
            status: field(&record, 10, "status")?,
        });
    }
    Ok(rows)
}

/// Reads rows back from an emitted JSON report.
pub fn read_rows_json(path: &Path) -> Result<Vec<BenchRow>> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text)
        .map_err(|e| Error::Parse { line: e.line(), msg: e.to_string() })
}

/// Per-algorithm mean metric value as a function of rate, for one dataset
/// and metric: the table behind a line chart.
#[derive(Debug, Clone, PartialEq)]
pub struct PlotTable {
    pub dataset: String,
    pub metric: String,
    pub rates: Vec<f64>,
    pub algorithms: Vec<String>,
    /// `values[rate_index][algorithm_index]`; NaN when nothing succeeded.
    pub values: Vec<Vec<f64>>,
}

/// Collapses a report to the plot table of `(dataset, metric)`, averaging
/// `status = "ok"` rows over repeats and patterns, rates ascending.
pub fn plot_table(report: &BenchReport, dataset: &str, metric: &str) -> Result<PlotTable> {
    let mut algorithms: Vec<String> = Vec::new();
    let mut rates: Vec<f64> = Vec::new();
    for row in &report.rows {
        if row.dataset != dataset || row.metric != metric {
            continue;
        }
        if !algorithms.contains(&row.algorithm) {
            algorithms.push(row.algorithm.clone());
        }
        if !rates.iter().any(|&r| r == row.rate) {
            rates.push(row.rate);
        }
    }
    if algorithms.is_empty() {
        return Err(Error::Spec(format!(
            "no rows for dataset `{dataset}` and metric `{metric}`"
        )));
    }
    algorithms.sort_unstable();
    rates.sort_by(|a, b| a.partial_cmp(b).expect("finite rates"));
    let mut values = vec![vec![f64::NAN; algorithms.len()]; rates.len()];
    for (ri, &rate) in rates.iter().enumerate() {
        for (ai, algo) in algorithms.iter().enumerate() {
            let picked: Vec<f64> = report
                .rows
                .iter()
                .filter(|r| {
                    r.dataset == dataset
                        && r.metric == metric
                        && r.rate == rate
                        && &r.algorithm == algo
                        && r.status == "ok"
                })
                .map(|r| r.value)
                .collect();
            if !picked.is_empty() {
                values[ri][ai] = picked.iter().sum::<f64>() / picked.len() as f64;
            }
        }
    }
    Ok(PlotTable {
        dataset: dataset.to_string(),
        metric: metric.to_string(),
        rates,
        algorithms,
        values,
    })
}

/// Like [`plot_table`] but charts mean runtime instead of metric value.
pub fn runtime_table(report: &BenchReport, dataset: &str) -> Result<PlotTable> {
    let first_metric = report
        .rows
        .iter()
        .find(|r| r.dataset == dataset && r.repeat >= 0)
        .map(|r| r.metric.clone())
        .ok_or_else(|| Error::Spec(format!("no rows for dataset `{dataset}`")))?;
    let mut table = plot_table(
        &BenchReport {
            rows: report
                .rows
                .iter()
                .filter(|r| r.metric == first_metric)
                .map(|r| BenchRow { value: r.runtime_seconds, ..r.clone() })
                .collect(),
        },
        dataset,
        &first_metric,
    )?;
    table.metric = "runtime_seconds".into();
    Ok(table)
}

/// What a plot file charts against the contamination rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlotKind {
    MetricVsRate,
    RuntimeVsRate,
}

fn file_stem(parts: &[&str]) -> String {
    parts
        .join("_")
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '_' || c == '-' { c } else { '-' })
        .collect()
}

/// Writes one CSV plus one SVG per chart into `dir` and returns the paths.
/// Metric charts come out per (dataset, metric); runtime charts per dataset.
pub fn emit_plot_data(report: &BenchReport, kind: PlotKind, dir: &Path) -> Result<Vec<PathBuf>> {
    if report.rows.is_empty() {
        return Err(Error::Spec("cannot plot an empty report".into()));
    }
    std::fs::create_dir_all(dir)?;
    let mut datasets: Vec<String> = Vec::new();
    let mut metrics: Vec<String> = Vec::new();
    for row in &report.rows {
        if !datasets.contains(&row.dataset) {
            datasets.push(row.dataset.clone());
        }
        if !metrics.contains(&row.metric) {
            metrics.push(row.metric.clone());
        }
    }
    let mut tables = Vec::new();
    match kind {
        PlotKind::MetricVsRate => {
            for ds in &datasets {
                for metric in &metrics {
                    tables.push((file_stem(&[ds, metric]), plot_table(report, ds, metric)?));
                }
            }
        }
        PlotKind::RuntimeVsRate => {
            for ds in &datasets {
                tables.push((file_stem(&[ds, "runtime"]), runtime_table(report, ds)?));
            }
        }
    }
    let mut written = Vec::with_capacity(tables.len() * 2);
    for (stem, table) in tables {
        let csv_path = dir.join(format!("{stem}.csv"));
        write_plot_csv(&table, &csv_path)?;
        let svg_path = dir.join(format!("{stem}.svg"));
        std::fs::write(&svg_path, render_svg(&table))?;
        written.push(csv_path);
        written.push(svg_path);
    }
    Ok(written)
}

/// Writes a plot table as CSV: a `rate` column plus one column per
/// algorithm.
pub fn write_plot_csv(table: &PlotTable, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["rate".to_string()];
    header.extend(table.algorithms.iter().cloned());
    w.write_record(&header)?;
    for (ri, &rate) in table.rates.iter().enumerate() {
        let mut record = vec![format!("{rate}")];
        record.extend(table.values[ri].iter().map(|v| format!("{v}")));
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}

const SVG_WIDTH: f64 = 800.0;
const SVG_HEIGHT: f64 = 500.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];

/// Renders a plot table as a fixed-size 800x500 SVG line chart with one
/// polyline per algorithm, min/max axis labels, and a legend.
pub fn render_svg(table: &PlotTable) -> String {
    let (left, right, top, bottom) = (70.0, 170.0, 30.0, 50.0);
    let plot_w = SVG_WIDTH - left - right;
    let plot_h = SVG_HEIGHT - top - bottom;

    let finite: Vec<f64> = table
        .values
        .iter()
        .flatten()
        .cloned()
        .filter(|v| v.is_finite())
        .collect();
    let (vmin, vmax) = finite
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let (vmin, vmax) = if finite.is_empty() {
        (0.0, 1.0)
    } else if vmin == vmax {
        (vmin - 0.5, vmax + 0.5)
    } else {
        (vmin, vmax)
    };
    let rmin = *table.rates.first().unwrap_or(&0.0);
    let rmax = *table.rates.last().unwrap_or(&1.0);
    let x_of = |rate: f64| {
        if rmax == rmin {
            left + plot_w / 2.0
        } else {
            left + (rate - rmin) / (rmax - rmin) * plot_w
        }
    };
    let y_of = |v: f64| top + (1.0 - (v - vmin) / (vmax - vmin)) * plot_h;

    let mut svg = String::new();
    let _ = write!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{SVG_WIDTH}\" height=\"{SVG_HEIGHT}\" viewBox=\"0 0 {SVG_WIDTH} {SVG_HEIGHT}\">\n"
    );
    let _ = write!(
        svg,
        "<rect width=\"{SVG_WIDTH}\" height=\"{SVG_HEIGHT}\" fill=\"white\"/>\n"
    );
    let _ = write!(
        svg,
        "<text x=\"{}\" y=\"18\" font-family=\"sans-serif\" font-size=\"14\">{} / {}</text>\n",
        left,
        table.dataset,
        table.metric
    );
    // axes
    let _ = write!(
        svg,
        "<line x1=\"{left}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n",
        top + plot_h,
        left + plot_w,
        top + plot_h
    );
    let _ = write!(
        svg,
        "<line x1=\"{left}\" y1=\"{top}\" x2=\"{left}\" y2=\"{}\" stroke=\"black\"/>\n",
        top + plot_h
    );
    // min/max tick labels
    let _ = write!(
        svg,
        "<text x=\"{left}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">{rmin}</text>\n",
        top + plot_h + 16.0
    );
    let _ = write!(
        svg,
        "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">{rmax}</text>\n",
        left + plot_w,
        top + plot_h + 16.0
    );
    let _ = write!(
        svg,
        "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">{vmax:.4}</text>\n",
        left - 6.0,
        top + 4.0
    );
    let _ = write!(
        svg,
        "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">{vmin:.4}</text>\n",
        left - 6.0,
        top + plot_h + 4.0
    );
    let _ = write!(
        svg,
        "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\">rate</text>\n",
        left + plot_w / 2.0,
        SVG_HEIGHT - 12.0
    );

    for (ai, algo) in table.algorithms.iter().enumerate() {
        let color = PALETTE[ai % PALETTE.len()];
        let points: Vec<String> = table
            .rates
            .iter()
            .enumerate()
            .filter(|(ri, _)| table.values[*ri][ai].is_finite())
            .map(|(ri, &rate)| format!("{:.2},{:.2}", x_of(rate), y_of(table.values[ri][ai])))
            .collect();
        let _ = write!(
            svg,
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"2\" points=\"{}\"/>\n",
            points.join(" ")
        );
        let ly = top + 10.0 + ai as f64 * 18.0;
        let lx = left + plot_w + 14.0;
        let _ = write!(
            svg,
            "<rect x=\"{lx}\" y=\"{}\" width=\"12\" height=\"12\" fill=\"{color}\"/>\n",
            ly - 10.0
        );
        let _ = write!(
            svg,
            "<text x=\"{}\" y=\"{ly}\" font-family=\"sans-serif\" font-size=\"12\">{algo}</text>\n",
            lx + 18.0
        );
    }
    svg.push_str("</svg>\n");
    svg
}
