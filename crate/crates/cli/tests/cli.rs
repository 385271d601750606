use std::path::Path;
use std::process::{Command, Output};

use gapfill::synthetic::{generate_synthetic, SyntheticKind};

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_gapfill"));
    cmd.env_remove("IMPUTE_SEED");
    cmd
}

fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("spawn gapfill")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn write_matrix(path: &Path, m: usize, n: usize, seed: u64) {
    generate_synthetic(SyntheticKind::CorrelatedLowrank, m, n, 0.05, seed)
        .unwrap()
        .save(path)
        .unwrap();
}

#[test]
fn list_algos_prints_six_builtins_with_families() {
    let out = run(&mut bin().arg("list-algos"));
    assert!(out.status.success());
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 6);
    for name in ["cdrec", "knn", "linear-interp", "mean", "pattern-window", "soft-svd"] {
        assert!(lines.iter().any(|l| l.starts_with(name)), "{name} missing in {text}");
    }
    assert!(text.contains("matrix-completion"));
}

#[test]
fn out_of_range_rate_exits_two_citing_bounds() {
    let out = run(bin()
        .args(["contaminate", "--rate", "0.9", "--in", "/dev/null", "--out", "/tmp/nowhere"]));
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("[0.01, 0.80]"));
}

#[test]
fn contaminate_then_impute_leaves_no_missing_cells() {
    let dir = tempfile::tempdir().unwrap();
    let truth = dir.path().join("truth.csv");
    write_matrix(&truth, 6, 150, 1);

    let out_dir = dir.path().join("holes");
    let out = run(bin().args([
        "contaminate",
        "--in",
        truth.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
        "--rate",
        "0.2",
        "--seed",
        "5",
    ]));
    assert!(out.status.success(), "{}", stderr(&out));
    let holed = std::fs::read_to_string(out_dir.join("contaminated.csv")).unwrap();
    assert!(holed.contains("NaN"));
    assert!(out_dir.join("mask_delta.json").exists());

    let filled = dir.path().join("filled.csv");
    let out = run(bin().args([
        "impute",
        "--algo",
        "cdrec",
        "--param",
        "rank=2",
        "--in",
        out_dir.join("contaminated.csv").to_str().unwrap(),
        "--out",
        filled.to_str().unwrap(),
        "--seed",
        "5",
    ]));
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).contains("cdrec"));
    let text = std::fs::read_to_string(&filled).unwrap();
    assert!(!text.contains("NaN"));
}

#[test]
fn impute_seed_env_is_the_fallback() {
    let dir = tempfile::tempdir().unwrap();
    let truth = dir.path().join("truth.csv");
    write_matrix(&truth, 5, 100, 2);

    let masked = |out: &Path, env: Option<&str>, flag: Option<&str>| {
        let mut cmd = bin();
        cmd.args([
            "contaminate",
            "--in",
            truth.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ]);
        if let Some(seed) = env {
            cmd.env("IMPUTE_SEED", seed);
        }
        if let Some(seed) = flag {
            cmd.args(["--seed", seed]);
        }
        let res = run(&mut cmd);
        assert!(res.status.success(), "{}", stderr(&res));
        std::fs::read_to_string(out.join("contaminated.csv")).unwrap()
    };

    let a = masked(&dir.path().join("a"), Some("9"), None);
    let b = masked(&dir.path().join("b"), Some("9"), None);
    let c = masked(&dir.path().join("c"), Some("1"), None);
    let d = masked(&dir.path().join("d"), Some("1"), Some("9"));
    assert_eq!(a, b, "same env seed must reproduce the mask");
    assert_ne!(a, c, "different env seed must change the mask");
    assert_eq!(a, d, "--seed must beat IMPUTE_SEED");

    let bad = run(bin()
        .env("IMPUTE_SEED", "not-a-number")
        .args([
            "contaminate",
            "--in",
            truth.to_str().unwrap(),
            "--out",
            dir.path().join("e").to_str().unwrap(),
        ]));
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn run_pipeline_reproduces_checksums() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("artifacts");
    let config = dir.path().join("pipeline.json");
    std::fs::write(
        &config,
        format!(
            r#"{{
                "seed": 3,
                "dataset": {{"source": {{"synthetic": {{"kind": "sinusoid-mix", "series": 4, "points": 100}}}}}},
                "contamination": {{"rate": 0.15}},
                "imputation": {{"algorithms": [{{"name": "linear-interp"}}]}},
                "output": {{"dir": {:?}}}
            }}"#,
            out_dir.to_str().unwrap()
        ),
    )
    .unwrap();

    let first = run(bin().args(["run", "--config", config.to_str().unwrap()]));
    assert!(first.status.success(), "{}", stderr(&first));
    assert!(stdout(&first).contains("linear-interp"));
    for name in ["contaminated.csv", "mask_delta.json", "imputed_linear-interp.csv", "scores.json", "manifest.json"] {
        assert!(out_dir.join(name).exists(), "missing {name}");
    }
    let manifest_a: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("manifest.json")).unwrap())
            .unwrap();

    let second = run(bin().args(["run", "--config", config.to_str().unwrap()]));
    assert!(second.status.success());
    let manifest_b: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest_a["checksums"], manifest_b["checksums"]);
    assert_eq!(manifest_a["seeds"], manifest_b["seeds"]);
    assert_eq!(manifest_a["config"], manifest_b["config"]);
}

#[test]
fn misspelled_config_section_exits_two_naming_it() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.json");
    std::fs::write(
        &config,
        r#"{
            "dataset": {"source": {"synthetic": {"kind": "ar1", "series": 3, "points": 60}}},
            "contamnation": {"rate": 0.2},
            "imputation": {"algorithms": [{"name": "mean"}]},
            "output": {"dir": "/tmp/never"}
        }"#,
    )
    .unwrap();
    let out = run(bin().args(["run", "--config", config.to_str().unwrap()]));
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("contamnation"), "{}", stderr(&out));
}

#[test]
fn optimize_reports_grid_best() {
    let dir = tempfile::tempdir().unwrap();
    let truth = dir.path().join("truth.csv");
    write_matrix(&truth, 8, 120, 3);
    let space = dir.path().join("space.json");
    std::fs::write(&space, r#"{"k": {"type": "int-range", "min": 1, "max": 4}}"#).unwrap();
    let report = dir.path().join("tuning.json");

    let out = run(bin().args([
        "optimize",
        "--algo",
        "knn",
        "--in",
        truth.to_str().unwrap(),
        "--space",
        space.to_str().unwrap(),
        "--out",
        report.to_str().unwrap(),
        "--seed",
        "4",
    ]));
    assert!(out.status.success(), "{}", stderr(&out));
    let parsed: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(parsed["trials"].as_array().unwrap().len(), 4);
    assert!(parsed["best_params"]["k"].is_i64());
}

#[test]
fn benchmark_emits_report_and_plots() {
    let dir = tempfile::tempdir().unwrap();
    let plan = dir.path().join("plan.json");
    std::fs::write(
        &plan,
        r#"{
            "datasets": [{"name": "syn", "source": {"synthetic": {"kind": "correlated-lowrank", "series": 5, "points": 80, "noise_std": 0.05}}}],
            "patterns": [{}],
            "rates": [0.1, 0.3],
            "algorithms": [{"name": "mean"}, {"name": "linear-interp"}],
            "metrics": ["rmse"],
            "repeats": 2,
            "base_seed": 7
        }"#,
    )
    .unwrap();
    let out_dir = dir.path().join("bench");
    let out = run(bin().args([
        "benchmark",
        "--plan",
        plan.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
        "--plots",
    ]));
    assert!(out.status.success(), "{}", stderr(&out));
    let report = std::fs::read_to_string(out_dir.join("report.csv")).unwrap();
    assert!(report.starts_with("dataset,pattern,arrangement,rate,algorithm,repeat,metric,value,runtime_seconds,seed,status"));
    // 1 dataset x 1 pattern x 2 rates x 2 repeats x 2 algorithms x 1 metric
    assert!(stdout(&out).contains("8 measurement rows"));
    assert!(out_dir.join("plots").join("syn_rmse.csv").exists());
    assert!(out_dir.join("plots").join("syn_rmse.svg").exists());
    assert!(out_dir.join("plots").join("syn_runtime.svg").exists());
}

#[test]
fn downstream_brackets_algorithms_with_oracle_and_baseline() {
    let dir = tempfile::tempdir().unwrap();
    let truth = dir.path().join("truth.csv");
    write_matrix(&truth, 4, 200, 6);
    let out = run(bin().args([
        "downstream",
        "--in",
        truth.to_str().unwrap(),
        "--algo",
        "mean",
        "--seed",
        "6",
    ]));
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.starts_with("algorithm,forecaster,mae,smape"));
    assert!(text.contains("__oracle__"));
    assert!(text.contains("__baseline__"));
    assert!(text.contains("mean,ses"));
}

#[test]
fn unknown_algorithm_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let truth = dir.path().join("truth.csv");
    write_matrix(&truth, 4, 60, 8);
    let out = run(bin().args([
        "impute",
        "--algo",
        "no-such-thing",
        "--in",
        truth.to_str().unwrap(),
        "--out",
        dir.path().join("x.csv").to_str().unwrap(),
    ]));
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("no-such-thing"));
}
