use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use cdc_cli::config::{preset_width, SizePreset};
use cdc_cli::experiment::run_config;
use cdc_cli::plot::{lcurve_frame, lcurve_svg, sweep_svg};
use cdc_cli::report::{read_sweep_csv, SweepRow};
use cdc_cli::{CliError, ExperimentConfig};
use cdc_core::stopping::StopDecision;
use cdc_core::twin::{EpochRecord, GradSummary, ModelKind, TwinTrace};
use serde_json::json;

fn tiny(out: &Path, learning_rates: &[f64], seeds: &[(u64, u64)], stopping: serde_json::Value) -> serde_json::Value {
    json!({
        "task": { "kind": "synthetic", "n_train": 20, "n_test": 20, "dim": 5, "classes": 2, "seed": 3 },
        "noise_fraction": 0.2,
        "model": { "kind": "linear", "width": 30 },
        "learning_rates": learning_rates,
        "seeds": seeds,
        "batch_size": 4,
        "max_epochs": 10,
        "stopping": stopping,
        "output_dir": out,
    })
}

fn parse(v: &serde_json::Value) -> ExperimentConfig {
    ExperimentConfig::from_json(&v.to_string(), Path::new("inline.json")).unwrap()
}

fn write_config(dir: &Path, v: &serde_json::Value) -> PathBuf {
    let p = dir.join("config.json");
    fs::write(&p, v.to_string()).unwrap();
    p
}

#[test]
fn one_cell_two_methods() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = parse(&tiny(
        &out,
        &[0.1],
        &[(1, 2)],
        json!([{ "method": "cdc_threshold" }, { "method": "oracle", "budget": 10 }]),
    ));
    let s = run_config(&cfg).unwrap();
    assert!(s.succeeded());
    assert_eq!(fs::read_dir(out.join("traces")).unwrap().count(), 1);
    let decisions: Vec<StopDecision> =
        serde_json::from_str(&fs::read_to_string(out.join("decisions/lr0.1_seeds1-2.json")).unwrap()).unwrap();
    assert_eq!(decisions.len(), 2);
    let rows = read_sweep_csv(fs::File::open(out.join("sweep.csv")).unwrap()).unwrap();
    assert_eq!(rows.len(), 2);
    assert!(out.join("aggregate.md").exists());
    assert_eq!(fs::read_to_string(out.join("failures.json")).unwrap().trim(), "[]");
}

#[test]
fn full_grid_row_count_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let methods = json!([
        { "method": "cdc_threshold" },
        { "method": "cdc_curvature" },
        { "method": "cv", "folds": 2, "patience": 2 },
        { "method": "eb" },
        { "method": "gd", "pairs": 2, "patience": 2 },
        { "method": "oracle", "budget": 10 }
    ]);
    let lrs = [0.01, 0.02, 0.05, 0.1, 0.2];
    let seeds = [(1, 2), (3, 4), (5, 6)];
    let a = run_config(&parse(&tiny(&dir.path().join("a"), &lrs, &seeds, methods.clone()))).unwrap();
    assert!(a.succeeded(), "{:?}", a.failures);
    assert_eq!(a.rows.len(), 90);
    assert_eq!(fs::read_dir(dir.path().join("a/decisions")).unwrap().count(), 15);

    run_config(&parse(&tiny(&dir.path().join("b"), &lrs, &seeds, methods))).unwrap();
    for f in ["sweep.csv", "traces/lr0.05_seeds3-4.csv", "decisions/lr0.2_seeds5-6.json"] {
        assert_eq!(
            fs::read(dir.path().join("a").join(f)).unwrap(),
            fs::read(dir.path().join("b").join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn config_validation() {
    let out = Path::new("unused");
    let ok = tiny(out, &[0.1], &[(1, 2)], json!([{ "method": "oracle" }]));
    parse(&ok).validate().unwrap();

    let mut typo = ok.clone();
    typo["learning_rate"] = json!([0.1]);
    assert!(matches!(
        ExperimentConfig::from_json(&typo.to_string(), Path::new("c.json")),
        Err(CliError::ConfigParse { .. })
    ));

    for (key, value) in [
        ("learning_rates", json!([])),
        ("stopping", json!([])),
        ("seeds", json!([[4, 4]])),
        ("learning_rates", json!([-0.1])),
        ("noise_fraction", json!(1.5)),
    ] {
        let mut bad = ok.clone();
        bad[key] = value;
        let err = parse(&bad).validate().unwrap_err();
        assert_eq!(err.exit_code(), 2, "{key}: {err}");
    }

    let mut dup = ok.clone();
    dup["stopping"] = json!([{ "method": "oracle" }, { "method": "oracle" }]);
    assert!(parse(&dup).validate().is_err());
}

#[test]
fn size_presets() {
    let widths: Vec<usize> = [SizePreset::Small, SizePreset::Medium, SizePreset::Large]
        .into_iter()
        .flat_map(|s| [preset_width(ModelKind::Linear, s), preset_width(ModelKind::TwoLayer, s)])
        .collect();
    assert_eq!(widths, [9_000, 150, 25_000, 350, 50_000, 700]);
}

#[test]
fn shipped_configs_validate() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut n = 0;
    for entry in fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        let cfg = ExperimentConfig::load(&path).unwrap();
        cfg.validate().unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        n += 1;
    }
    assert!(n >= 5);
}

fn record(epoch: usize, w: f64, p: f64, m: f64) -> EpochRecord {
    EpochRecord {
        epoch,
        weight_cosdist: w,
        pred_cosdist: p,
        cf_cosdist: None,
        cf_raw_cosdist: None,
        train_loss1: 1.0,
        train_loss2: 1.0,
        eval_metric1: m,
        grad: GradSummary {
            grad_norm: 1.0,
            evidence: -1.0,
            disparity: None,
            num_batches: 1,
        },
        rank_flag: None,
        ref_cosdist: None,
    }
}

#[test]
fn lcurve_plot_structure() {
    let trace = TwinTrace::from_records(
        1.0,
        vec![record(1, 0.9, 0.5, 0.6), record(2, 0.4, 0.3, 0.7), record(3, 0.1, 0.2, 0.65)],
    )
    .unwrap();
    let svg = lcurve_svg(&trace, Some(2)).unwrap();
    let doc = roxmltree::Document::parse(&svg).unwrap();
    assert_eq!(doc.root_element().tag_name().name(), "svg");
    let polylines: Vec<_> = doc.descendants().filter(|n| n.has_tag_name("polyline")).collect();
    assert_eq!(polylines.len(), 3);
    assert!(polylines.iter().all(|p| p.attribute("points").unwrap().split(' ').count() == 3));

    let marker = doc
        .descendants()
        .find(|n| n.attribute("class") == Some("stop-marker"))
        .unwrap();
    let x: f64 = marker.attribute("x1").unwrap().parse().unwrap();
    assert!((x - lcurve_frame(3, 1.0).x(2.0)).abs() < 1e-3);
    assert_eq!(marker.attribute("x1"), marker.attribute("x2"));

    assert!(lcurve_svg(&TwinTrace::new(1.0), None).is_err());
}

#[test]
fn sweep_plot_structure() {
    let row = |lr: f64, method: &str, m: f64| SweepRow {
        learning_rate: lr,
        seed1: 1,
        seed2: 2,
        method: method.into(),
        stop_epoch: 4,
        test_metric: m,
        criterion_value: 0.1,
        status: "stopped".into(),
    };
    let rows = [
        row(0.001, "cdc_threshold", 0.8),
        row(0.01, "cdc_threshold", 0.85),
        row(0.001, "oracle", 0.82),
        row(0.01, "oracle", 0.86),
    ];
    let svg = sweep_svg(&rows).unwrap();
    let doc = roxmltree::Document::parse(&svg).unwrap();
    assert_eq!(doc.descendants().filter(|n| n.has_tag_name("polyline")).count(), 2);
    assert!(sweep_svg(&[]).is_err());
}

fn cdc(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_cdc")).args(args).output().unwrap();
    (
        out.status.code().unwrap(),
        String::from_utf8(out.stdout).unwrap(),
        String::from_utf8(out.stderr).unwrap(),
    )
}

#[test]
fn binary_subcommands_and_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let good = tiny(
        &out,
        &[0.1],
        &[(1, 2)],
        json!([{ "method": "cdc_threshold" }, { "method": "oracle", "budget": 10 }]),
    );
    let path = write_config(dir.path(), &good);
    let (code, stdout, _) = cdc(&["run", "--config", path.to_str().unwrap()]);
    assert_eq!(code, 0, "{stdout}");

    let trace = out.join("traces/lr0.1_seeds1-2.csv");
    let (code, stdout, _) = cdc(&["corner", "--trace", trace.to_str().unwrap(), "--theta", "0.2"]);
    assert_eq!(code, 0);
    let d: StopDecision = serde_json::from_str(&stdout).unwrap();
    assert_eq!(d.method, "cdc_threshold");
    let (code, stdout, _) = cdc(&[
        "corner",
        "--trace",
        trace.to_str().unwrap(),
        "--curvature",
        "--delta",
        "0.1",
        "--sigma",
        "2",
    ]);
    assert_eq!(code, 0);
    assert!(stdout.contains("cdc_curvature"));

    let sweep = out.join("sweep.csv");
    let (code, stdout, _) = cdc(&["report", "--sweep", sweep.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert!(stdout.contains("| oracle (reference) |"));

    let svg = dir.path().join("l.svg");
    let (code, _, _) = cdc(&[
        "plot",
        "--input",
        trace.to_str().unwrap(),
        "--kind",
        "lcurve",
        "--out",
        svg.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    roxmltree::Document::parse(&fs::read_to_string(&svg).unwrap()).unwrap();
    let (code, _, _) = cdc(&[
        "plot",
        "--input",
        sweep.to_str().unwrap(),
        "--kind",
        "sweep",
        "--out",
        svg.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);

    let mut bad = good.clone();
    bad["stopping"] = json!([]);
    let (code, _, stderr) = cdc(&["run", "--config", write_config(dir.path(), &bad).to_str().unwrap()]);
    assert_eq!(code, 2, "{stderr}");

    let mut diverging = good.clone();
    diverging["loss"] = json!("rmse");
    diverging["learning_rates"] = json!([0.1, 1e12]);
    let (code, _, stderr) = cdc(&["run", "--config", write_config(dir.path(), &diverging).to_str().unwrap()]);
    assert_eq!(code, 1, "{stderr}");
    let rows = read_sweep_csv(fs::File::open(&sweep).unwrap()).unwrap();
    assert_eq!(rows.len(), 2);
    assert!(fs::read_to_string(out.join("failures.json")).unwrap().contains("1000000000000"));
}
